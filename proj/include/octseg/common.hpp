#pragma once

#include <cstdarg>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>

namespace octseg {

// Maps to CLI exit code 1.
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

// Maps to CLI exit code 2.
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

enum class LogLevel { quiet = 0, warn = 1, info = 2, debug = 3 };

// Read once from OCTSEG_LOG (quiet|warn|info|debug), default info.
LogLevel log_level();

void log_warn(const char* fmt, ...);
void log_info(const char* fmt, ...);
void log_debug(const char* fmt, ...);

// Worker count from OCTSEG_THREADS, default hardware_concurrency (min 1).
unsigned thread_count();

// Runs fn(i) for i in [0, count). With threads <= 1 runs inline; otherwise
// distributes indices over a transient pool. fn must be safe to run
// concurrently for distinct i.
void parallel_for(std::size_t count, unsigned threads,
                  const std::function<void(std::size_t)>& fn);

std::string format_string(const char* fmt, ...);

}  // namespace octseg
