#pragma once

#include <cstdint>
#include <string_view>

namespace etfc {

/// splitmix64 finalizer.
std::uint64_t mix64(std::uint64_t x) noexcept;

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view bytes) noexcept;

/// Sub-seed for a named component: mix64(master ^ fnv1a64(component)).
std::uint64_t derive_seed(std::uint64_t master, std::string_view component) noexcept;

/// Sub-seed for an indexed stream (trial, epoch, ...):
/// mix64(master + 0x9e3779b97f4a7c15 * (index + 1)).
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) noexcept;

}  // namespace etfc
