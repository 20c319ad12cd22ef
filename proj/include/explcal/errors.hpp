#pragma once

#include <stdexcept>
#include <string>

namespace explcal {

// Bad input data or configuration; maps to CLI exit code 1.
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed file content (JSONL lines, cache entries, config files).
class ParseError : public std::runtime_error {
public:
    explicit ParseError(const std::string& msg) : std::runtime_error(msg) {}
};

class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// Completion backend failure after retries; maps to CLI exit code 2
// once the run's error budget is exhausted.
class BackendError : public std::runtime_error {
public:
    BackendError(const std::string& msg, int http_status = 0, bool retriable = false)
        : std::runtime_error(msg), status(http_status), retriable(retriable) {}

    int status = 0;
    bool retriable = false;
};

} // namespace explcal
