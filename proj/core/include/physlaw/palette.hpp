#pragma once

#include "physlaw/common.hpp"

namespace physlaw::palette {

// Scene palettes. Within each scene family every pair of colors (background
// included) is at least 80 apart in max-channel distance, so the track
// parser's per-channel threshold of 40 can never match a pixel to two
// entries at once.

// Fundamental scenarios: dark background.
inline constexpr Rgb8 kBackground{0, 0, 0};
inline constexpr Rgb8 kRed{220, 30, 30};
inline constexpr Rgb8 kBlue{30, 60, 220};
inline constexpr Rgb8 kGray{128, 128, 128};

// Combinatorial scenes: light background, fixed bodies near-black.
inline constexpr Rgb8 kCombBackground{240, 240, 240};
inline constexpr Rgb8 kStaticBlack{10, 10, 10};
inline constexpr Rgb8 kGreen{20, 200, 50};
inline constexpr Rgb8 kYellow{235, 235, 25};

}  // namespace physlaw::palette
