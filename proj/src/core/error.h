#pragma once

#include <stdexcept>
#include <string>

namespace pa {

// Every rejected precondition in the library throws this; the C API boundary
// translates it into a status code plus a retrievable message.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

#define PA_CHECK(cond, msg)                 \
    do {                                    \
        if (!(cond)) throw ::pa::Error(msg); \
    } while (0)

}  // namespace pa
