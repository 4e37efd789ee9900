// Copyright 2026 csvmasr authors
// Shared error type, checks, and small utilities.
//
// Licensed under the Apache License, Version 2.0

#pragma once

#include <algorithm>
#include <cstdint>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace csvmasr {

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

namespace detail {

inline void format_into(std::ostringstream&) {}

template <typename T, typename... Rest>
void format_into(std::ostringstream& os, const T& v, const Rest&... rest) {
  os << v;
  format_into(os, rest...);
}

template <typename... Args>
std::string format_msg(const Args&... args) {
  std::ostringstream os;
  format_into(os, args...);
  return os.str();
}

}  // namespace detail

#define CM_CHECK(cond, ...)                                              \
  do {                                                                   \
    if (!(cond)) {                                                       \
      throw ::csvmasr::Error(::csvmasr::detail::format_msg(__VA_ARGS__)); \
    }                                                                    \
  } while (0)

// Runs fn(i) for i in [0, n). Iterations must be independent; with
// threads > 1 the index space is split into contiguous chunks so any
// per-index output written by fn is position-stable regardless of
// thread count.
template <typename Fn>
void parallel_for(int n, int threads, Fn&& fn) {
  if (n <= 0) return;
  if (threads <= 1 || n == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  int workers = std::min(threads, n);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  std::exception_ptr first_error;
  std::mutex err_mu;
  for (int w = 0; w < workers; ++w) {
    int lo = static_cast<int>(static_cast<int64_t>(n) * w / workers);
    int hi = static_cast<int>(static_cast<int64_t>(n) * (w + 1) / workers);
    pool.emplace_back([&, lo, hi] {
      try {
        for (int i = lo; i < hi; ++i) fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mu);
        if (!first_error) first_error = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace csvmasr
