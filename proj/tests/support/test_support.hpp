#pragma once

// Shared helpers for the unit and acceptance suites: scratch directories,
// table builders and a seeded generator of random fixtures.

#include <atomic>
#include <cstdio>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include <sys/wait.h>
#include <unistd.h>

#include "promptprobe/encoder.hpp"

namespace promptprobe::testing {

class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("promptprobe-test-" + std::to_string(::getpid()) + "-" +
             std::to_string(counter.fetch_add(1)));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::filesystem::path write_file(const std::filesystem::path& path,
                                        const std::string& content) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << content;
  return path;
}

inline std::shared_ptr<const EmbeddingTable> make_table(
    std::vector<std::pair<std::string, std::vector<double>>> rows) {
  std::vector<TokenEntry> entries;
  const std::size_t dim = rows.front().second.size();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    entries.push_back({i, rows[i].first, EmbeddingVector(rows[i].second)});
  }
  return std::make_shared<const EmbeddingTable>(dim, std::move(entries));
}

/// Orthonormal basis table: token "t<i>" is e_i in dim `n`.
inline std::shared_ptr<const EmbeddingTable> basis_table(std::size_t n) {
  std::vector<std::pair<std::string, std::vector<double>>> rows;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> v(n, 0.0);
    v[i] = 1.0;
    rows.emplace_back("t" + std::to_string(i), v);
  }
  return make_table(std::move(rows));
}

struct CommandResult {
  int exit_code = -1;
  std::string out;  // stdout only
};

/// Runs a shell command and captures its stdout.
inline CommandResult run_command(const std::string& command) {
  CommandResult r;
  FILE* pipe = ::popen(command.c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
  const int status = ::pclose(pipe);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

inline std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) out += c == '\'' ? std::string("'\\''") : std::string(1, c);
  return out + "'";
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  double uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(gen_);
  }
  double normal() { return std::normal_distribution<double>(0.0, 1.0)(gen_); }
  std::size_t index(std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(gen_);
  }

  std::vector<double> gaussian_vector(std::size_t dim) {
    std::vector<double> v(dim);
    for (auto& x : v) x = normal();
    return v;
  }

  EmbeddingVector embedding(std::size_t dim) { return EmbeddingVector(gaussian_vector(dim)); }

  /// Table of `n` random tokens named "w<i>".
  std::shared_ptr<const EmbeddingTable> random_table(std::size_t n, std::size_t dim) {
    std::vector<std::pair<std::string, std::vector<double>>> rows;
    for (std::size_t i = 0; i < n; ++i) rows.emplace_back("w" + std::to_string(i), gaussian_vector(dim));
    return make_table(std::move(rows));
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace promptprobe::testing
