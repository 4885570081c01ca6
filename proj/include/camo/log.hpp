#pragma once

#include <string_view>

namespace camo::log {

enum class Level { debug = 0, info, warn, error, off };

void set_level(Level level) noexcept;
Level level() noexcept;

void debug(std::string_view msg);
void info(std::string_view msg);
void warn(std::string_view msg);
void error(std::string_view msg);

}  // namespace camo::log
