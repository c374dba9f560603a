#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace raccredit {

inline constexpr const char* engine_version = "raccredit 1.0.0";

using Mw = double;
using Mwh = double;

// Error hierarchy. SpecError and its subclasses are configuration problems
// (CLI exit code 2); everything else is a runtime failure (exit code 1).
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class SpecError : public Error {
public:
  SpecError(std::string field_path, const std::string& what)
      : Error(field_path.empty() ? what : field_path + ": " + what),
        field_path_(std::move(field_path)) {}
  const std::string& field_path() const noexcept { return field_path_; }

private:
  std::string field_path_;
};

class OracleUnsupported : public SpecError {
public:
  explicit OracleUnsupported(const std::string& what) : SpecError("", "oracle unsupported: " + what) {}
};

class IrregularBaseline : public Error {
public:
  explicit IrregularBaseline(const std::string& what) : Error("irregular baseline: " + what) {}
};

class AdequateBaseline : public Error {
public:
  explicit AdequateBaseline(const std::string& what) : Error("adequate baseline: " + what) {}
};

class UnsupportedDirection : public Error {
public:
  using Error::Error;
};

class NegativeCapacity : public Error {
public:
  using Error::Error;
};

class NoSignChange : public Error {
public:
  using Error::Error;
};

namespace detail {

inline std::atomic<unsigned>& thread_limit_storage() {
  static std::atomic<unsigned> limit{0};
  return limit;
}

}  // namespace detail

/// Caps worker threads used by batch operations. Zero means hardware concurrency.
/// Results never depend on this value.
inline void set_thread_limit(unsigned threads) { detail::thread_limit_storage() = threads; }

inline unsigned thread_limit() {
  unsigned t = detail::thread_limit_storage();
  if (t == 0) t = std::max(1u, std::thread::hardware_concurrency());
  return t;
}

// Work is split into fixed-size chunks that do not depend on the thread
// count, so chunk-level partial results reduce in the same order every run.
inline constexpr std::size_t chunk_size = 4096;

inline std::size_t chunk_count(std::size_t n) { return (n + chunk_size - 1) / chunk_size; }

/// Runs body(chunk_index, begin, end) over all chunks of [0, n).
inline void parallel_chunks(std::size_t n,
                            const std::function<void(std::size_t, std::size_t, std::size_t)>& body) {
  const std::size_t chunks = chunk_count(n);
  const std::size_t workers = std::min<std::size_t>(thread_limit(), chunks);
  auto run_chunk = [&](std::size_t c) {
    const std::size_t begin = c * chunk_size;
    body(c, begin, std::min(n, begin + chunk_size));
  };
  if (workers <= 1) {
    for (std::size_t c = 0; c < chunks; ++c) run_chunk(c);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t c = next++; c < chunks; c = next++) {
        try {
          run_chunk(c);
        } catch (...) {
          if (!failed.exchange(true)) failure = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace raccredit
