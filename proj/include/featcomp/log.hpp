#pragma once

#include <string>

namespace featcomp::log {

enum class Level { error = 0, info = 1, debug = 2 };

// From FEATCOMP_LOG={error,info,debug}; defaults to info.
Level level();
void set_level(Level level);
void write(Level level, const std::string& message);

inline void error(const std::string& m) { write(Level::error, m); }
inline void info(const std::string& m) { write(Level::info, m); }
inline void debug(const std::string& m) { write(Level::debug, m); }

}  // namespace featcomp::log
