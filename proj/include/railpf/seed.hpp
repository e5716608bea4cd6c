#pragma once

#include <cstdint>
#include <string_view>

namespace railpf {

std::uint64_t fnv1a64(std::string_view text);
std::uint64_t splitmix64(std::uint64_t x);

/// Sub-seed for one named random stream: splitmix64(master ^ fnv1a64(label)).
std::uint64_t derive_seed(std::uint64_t master, std::string_view label);

}  // namespace railpf
