#include "camo/log.hpp"

#include <atomic>
#include <cstdio>
#include <mutex>

namespace camo::log {

namespace {

std::atomic<Level> g_level{Level::info};
std::mutex g_mutex;

void emit(Level lvl, const char* tag, std::string_view msg)
{
    if (lvl < g_level.load(std::memory_order_relaxed)) {
        return;
    }
    std::lock_guard lock(g_mutex);
    std::fprintf(stderr, "[%s] %.*s\n", tag, static_cast<int>(msg.size()), msg.data());
}

}  // namespace

void set_level(Level lvl) noexcept { g_level.store(lvl, std::memory_order_relaxed); }
Level level() noexcept { return g_level.load(std::memory_order_relaxed); }

void debug(std::string_view msg) { emit(Level::debug, "debug", msg); }
void info(std::string_view msg) { emit(Level::info, "info", msg); }
void warn(std::string_view msg) { emit(Level::warn, "warn", msg); }
void error(std::string_view msg) { emit(Level::error, "error", msg); }

}  // namespace camo::log
