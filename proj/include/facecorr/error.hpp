#pragma once

#include <stdexcept>
#include <string>

namespace facecorr {

// Error categories map 1:1 onto CLI exit codes.
enum class ErrorCode {
    Internal = 1,
    Usage = 2,
    Io = 3,
    Config = 4,
    Data = 5,
};

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& msg) : std::runtime_error(msg), code_(code) {}
    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& msg) { throw Error(code, msg); }
[[noreturn]] inline void fail_data(const std::string& msg) { fail(ErrorCode::Data, msg); }
[[noreturn]] inline void fail_io(const std::string& msg) { fail(ErrorCode::Io, msg); }
[[noreturn]] inline void fail_config(const std::string& msg) { fail(ErrorCode::Config, msg); }

inline void require(bool cond, ErrorCode code, const std::string& msg) {
    if (!cond) fail(code, msg);
}
inline void require_data(bool cond, const std::string& msg) { require(cond, ErrorCode::Data, msg); }

}  // namespace facecorr
