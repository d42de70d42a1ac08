#pragma once

#include <functional>
#include <iostream>
#include <string>

namespace patas {

/// Warning sink. Defaults to stderr; swap it out in tests or embedders.
inline std::function<void(const std::string&)>& warn_handler() {
    static std::function<void(const std::string&)> handler =
        [](const std::string& msg) { std::cerr << "[patas] warning: " << msg << "\n"; };
    return handler;
}

inline void warn(const std::string& msg) { warn_handler()(msg); }

}  // namespace patas
