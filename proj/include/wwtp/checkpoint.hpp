#pragma once

// Versioned plain-text archive of named tensors with shape headers.
//
//   wwtp-checkpoint 1
//   meta <key> <value...>
//   tensor <name> <rows> <cols>
//   <rows lines of cols values, %.17g>
//   end

#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "wwtp/errors.hpp"
#include "wwtp/nn.hpp"

namespace wwtp {

inline constexpr int kCheckpointVersion = 1;

inline std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc{}) throw UsageError("format_double: conversion failed");
  return std::string(buf, ptr);
}

inline double parse_double(const std::string& s) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) throw UsageError("cannot parse number '" + s + "'");
  return v;
}

class TensorArchive {
 public:
  void set_meta(const std::string& key, const std::string& value) { meta_[key] = value; }
  bool has_meta(const std::string& key) const { return meta_.count(key) > 0; }
  const std::string& meta(const std::string& key) const {
    auto it = meta_.find(key);
    if (it == meta_.end()) throw UsageError("checkpoint: missing metadata '" + key + "'");
    return it->second;
  }
  const std::map<std::string, std::string>& all_meta() const { return meta_; }

  void put(const std::string& name, const nn::Matrix& m) { tensors_[name] = m; }
  void put(const std::string& name, const std::vector<double>& v) {
    tensors_[name] = Eigen::Map<const nn::Matrix>(v.data(), static_cast<Eigen::Index>(v.size()), 1);
  }

  bool has(const std::string& name) const { return tensors_.count(name) > 0; }

  const nn::Matrix& get(const std::string& name, Eigen::Index rows, Eigen::Index cols) const {
    auto it = tensors_.find(name);
    if (it == tensors_.end()) throw UsageError("checkpoint: missing tensor '" + name + "'");
    if (it->second.rows() != rows || it->second.cols() != cols)
      throw UsageError("checkpoint: tensor '" + name + "' has shape " + std::to_string(it->second.rows()) + "x" +
                       std::to_string(it->second.cols()) + ", expected " + std::to_string(rows) + "x" +
                       std::to_string(cols));
    return it->second;
  }

  std::vector<double> get_vector(const std::string& name, std::size_t size) const {
    const auto& m = get(name, static_cast<Eigen::Index>(size), 1);
    return std::vector<double>(m.data(), m.data() + m.size());
  }

  void save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw UsageError("checkpoint: cannot write '" + path + "'");
    out << "wwtp-checkpoint " << kCheckpointVersion << '\n';
    for (const auto& [k, v] : meta_) out << "meta " << k << ' ' << v << '\n';
    for (const auto& [name, m] : tensors_) {
      out << "tensor " << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
      for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) out << (c ? " " : "") << format_double(m(r, c));
        out << '\n';
      }
    }
    out << "end\n";
    if (!out) throw UsageError("checkpoint: write to '" + path + "' failed");
  }

  static TensorArchive load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("checkpoint: cannot open '" + path + "'");
    std::string magic;
    int version = 0;
    in >> magic >> version;
    if (magic != "wwtp-checkpoint") throw UsageError("checkpoint: '" + path + "' is not a checkpoint file");
    if (version != kCheckpointVersion)
      throw UsageError("checkpoint: unsupported version " + std::to_string(version));
    TensorArchive a;
    std::string kind;
    while (in >> kind) {
      if (kind == "end") return a;
      if (kind == "meta") {
        std::string key, value;
        in >> key;
        std::getline(in, value);
        if (!value.empty() && value.front() == ' ') value.erase(0, 1);
        a.meta_[key] = value;
      } else if (kind == "tensor") {
        std::string name;
        Eigen::Index rows = 0, cols = 0;
        in >> name >> rows >> cols;
        if (!in || rows < 0 || cols < 0) throw UsageError("checkpoint: malformed tensor header");
        nn::Matrix m(rows, cols);
        std::string token;
        for (Eigen::Index r = 0; r < rows; ++r)
          for (Eigen::Index c = 0; c < cols; ++c) {
            if (!(in >> token)) throw UsageError("checkpoint: truncated tensor '" + name + "'");
            m(r, c) = parse_double(token);
          }
        a.tensors_[name] = std::move(m);
      } else {
        throw UsageError("checkpoint: unexpected record '" + kind + "'");
      }
    }
    throw UsageError("checkpoint: missing end marker in '" + path + "'");
  }

 private:
  std::map<std::string, std::string> meta_;
  std::map<std::string, nn::Matrix> tensors_;
};

inline std::string join_sizes(const std::vector<int>& sizes) {
  std::string s;
  for (std::size_t i = 0; i < sizes.size(); ++i) s += (i ? "," : "") + std::to_string(sizes[i]);
  return s;
}

inline void write_network(TensorArchive& a, const std::string& prefix, const nn::Mlp& net) {
  a.set_meta(prefix + ".sizes", join_sizes(net.sizes()));
  a.set_meta(prefix + ".activation", nn::to_string(net.hidden_activation()));
  for (std::size_t l = 0; l < net.layers().size(); ++l) {
    a.put(prefix + "." + std::to_string(l) + ".weight", net.layers()[l].weight);
    a.put(prefix + "." + std::to_string(l) + ".bias", nn::Matrix(net.layers()[l].bias));
  }
}

// Loads into a network of the expected architecture; any shape disagreement
// is an error.
inline void read_network(const TensorArchive& a, const std::string& prefix, nn::Mlp& net) {
  const std::string stored = a.meta(prefix + ".sizes");
  if (stored != join_sizes(net.sizes()))
    throw UsageError("checkpoint: network '" + prefix + "' has layer sizes " + stored + ", expected " +
                     join_sizes(net.sizes()));
  for (std::size_t l = 0; l < net.layers().size(); ++l) {
    auto& layer = net.layers()[l];
    layer.weight = a.get(prefix + "." + std::to_string(l) + ".weight", layer.weight.rows(), layer.weight.cols());
    layer.bias = a.get(prefix + "." + std::to_string(l) + ".bias", layer.bias.size(), 1);
  }
}

inline void write_optimizer(TensorArchive& a, const std::string& prefix, const nn::Adam& opt) {
  a.put(prefix + ".m", opt.first_moment());
  a.put(prefix + ".v", opt.second_moment());
  a.set_meta(prefix + ".steps", std::to_string(opt.steps()));
}

inline void read_optimizer(const TensorArchive& a, const std::string& prefix, nn::Adam& opt) {
  opt.first_moment() = a.get_vector(prefix + ".m", opt.first_moment().size());
  opt.second_moment() = a.get_vector(prefix + ".v", opt.second_moment().size());
  opt.set_steps(std::stoll(a.meta(prefix + ".steps")));
}

}  // namespace wwtp
