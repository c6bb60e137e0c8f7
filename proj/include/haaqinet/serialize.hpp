#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "haaqinet/autodiff.hpp"

namespace haaqi {

// Versioned binary container for model weights: magic, version, a JSON
// header describing what the tensors are, then named row-major f64 tensors.
// Little-endian on disk.

inline constexpr char kWeightsMagic[4] = {'H', 'Q', 'W', '1'};

namespace detail {

template <typename T>
void write_pod(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  require(bool(is), "weights: truncated file");
  return v;
}

}  // namespace detail

inline void save_weights(const std::string& path, const nlohmann::json& meta,
                         const ad::ParamStore& params) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  require(bool(f), "weights: cannot write " + path);
  f.write(kWeightsMagic, 4);
  detail::write_pod<std::uint32_t>(f, 1);
  std::string header = meta.dump();
  detail::write_pod<std::uint64_t>(f, header.size());
  f.write(header.data(), std::streamsize(header.size()));
  detail::write_pod<std::uint64_t>(f, std::uint64_t(params.size()));
  for (int i = 0; i < params.size(); ++i) {
    const std::string& name = params.name(i);
    const Mat& m = params.value(i);
    detail::write_pod<std::uint32_t>(f, std::uint32_t(name.size()));
    f.write(name.data(), std::streamsize(name.size()));
    detail::write_pod<std::uint64_t>(f, std::uint64_t(m.rows()));
    detail::write_pod<std::uint64_t>(f, std::uint64_t(m.cols()));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c)
        detail::write_pod<double>(f, m(r, c));
  }
  require(bool(f), "weights: short write " + path);
}

struct LoadedWeights {
  nlohmann::json meta;
  std::vector<std::pair<std::string, Mat>> tensors;

  const Mat& tensor(const std::string& name) const {
    for (const auto& [n, m] : tensors)
      if (n == name) return m;
    throw Error("weights: missing tensor " + name);
  }
};

inline LoadedWeights load_weights(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  require(bool(f), "weights: cannot open " + path);
  char magic[4];
  f.read(magic, 4);
  require(bool(f) && std::memcmp(magic, kWeightsMagic, 4) == 0,
          "weights: bad magic in " + path);
  auto version = detail::read_pod<std::uint32_t>(f);
  require(version == 1, "weights: unsupported version");
  auto header_len = detail::read_pod<std::uint64_t>(f);
  std::string header(header_len, '\0');
  f.read(header.data(), std::streamsize(header_len));
  require(bool(f), "weights: truncated header");
  LoadedWeights out;
  out.meta = nlohmann::json::parse(header);
  auto count = detail::read_pod<std::uint64_t>(f);
  for (std::uint64_t i = 0; i < count; ++i) {
    auto name_len = detail::read_pod<std::uint32_t>(f);
    std::string name(name_len, '\0');
    f.read(name.data(), std::streamsize(name_len));
    auto rows = detail::read_pod<std::uint64_t>(f);
    auto cols = detail::read_pod<std::uint64_t>(f);
    Mat m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c)
        m(r, c) = detail::read_pod<double>(f);
    out.tensors.emplace_back(std::move(name), std::move(m));
  }
  return out;
}

// Copies loaded tensors into an existing store; names and shapes must match.
inline void restore_params(ad::ParamStore& params, const LoadedWeights& w) {
  require(std::size_t(params.size()) == w.tensors.size(),
          "weights: tensor count mismatch");
  for (const auto& [name, m] : w.tensors) {
    Mat& dst = params.value(name);
    require(dst.rows() == m.rows() && dst.cols() == m.cols(),
            "weights: shape mismatch for " + name);
    dst = m;
  }
}

}  // namespace haaqi
