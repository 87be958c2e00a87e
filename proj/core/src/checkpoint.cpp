#include "mhop/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace mhop {

namespace {

constexpr const char* kMagic = "mhop-checkpoint";
constexpr int kVersion = 1;

std::string to_hex(double v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(std::bit_cast<std::uint64_t>(v)));
  return buf;
}

double from_hex(const std::string& s) {
  if (s.size() != 16) throw std::runtime_error("checkpoint: malformed value '" + s + "'");
  std::size_t used = 0;
  const auto bits = std::stoull(s, &used, 16);
  if (used != 16) throw std::runtime_error("checkpoint: malformed value '" + s + "'");
  return std::bit_cast<double>(static_cast<std::uint64_t>(bits));
}

}  // namespace

void write_checkpoint(std::ostream& os, const ParameterSet& params) {
  os << kMagic << ' ' << kVersion << ' ' << params.size() << '\n';
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& t = params.tensors()[i];
    os << params.names()[i] << ' ' << t.rank();
    for (auto e : t.shape()) os << ' ' << e;
    os << '\n';
    const auto values = t.data();
    for (std::size_t k = 0; k < values.size(); ++k) {
      if (k) os << ' ';
      os << to_hex(values[k]);
    }
    os << '\n';
  }
}

void save_checkpoint(const std::filesystem::path& path, const ParameterSet& params) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("checkpoint: cannot write " + path.string());
  write_checkpoint(os, params);
  if (!os) throw std::runtime_error("checkpoint: write failed for " + path.string());
}

std::vector<CheckpointEntry> read_checkpoint(std::istream& is) {
  std::string magic;
  int version = 0;
  std::size_t count = 0;
  if (!(is >> magic >> version >> count) || magic != kMagic) throw std::runtime_error("checkpoint: bad header");
  if (version != kVersion) throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
  std::vector<CheckpointEntry> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    CheckpointEntry e;
    std::size_t rank = 0;
    if (!(is >> e.name >> rank)) throw std::runtime_error("checkpoint: truncated entry header");
    e.shape.resize(rank);
    for (auto& d : e.shape) {
      if (!(is >> d)) throw std::runtime_error("checkpoint: truncated shape for " + e.name);
    }
    e.values.resize(numel(e.shape));
    std::string word;
    for (auto& v : e.values) {
      if (!(is >> word)) throw std::runtime_error("checkpoint: truncated values for " + e.name);
      v = from_hex(word);
    }
    out.push_back(std::move(e));
  }
  return out;
}

void load_checkpoint(const std::filesystem::path& path, ParameterSet& params) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("checkpoint: cannot read " + path.string());
  const auto entries = read_checkpoint(is);
  if (entries.size() != params.size()) {
    throw std::runtime_error("checkpoint: expected " + std::to_string(params.size()) + " tensors, found " +
                             std::to_string(entries.size()));
  }
  for (std::size_t i = 0; i < entries.size(); ++i) {
    auto& t = params.get(entries[i].name);
    if (t.shape() != entries[i].shape) throw std::runtime_error("checkpoint: shape mismatch for " + entries[i].name);
    auto dst = t.mutable_data();
    std::copy(entries[i].values.begin(), entries[i].values.end(), dst.begin());
  }
}

}  // namespace mhop
