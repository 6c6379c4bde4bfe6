// Checked-in transcription of the benchmark layouts, kept as literal
// 1-based gene ranges and coefficient listings. This is the reference the
// generator is tested against; the two encodings are maintained separately
// on purpose.
//
// Known quirks carried over from the source tables:
//  * mild-overlap chain (S1) covers genes 1..194; 195..200 are uncovered
//    and become singletons in the built structure.
//  * S3's final range 192..201 exceeds p=200 and is clamped at 200.
//  * the three-subgroup support list starts at 0; it is read as gene 1.
//  * the 32/50-dimensional first-subgroup listing has six coefficients for
//    five genes; the trailing -2 has no gene and is dropped.
#pragma once

#include <utility>
#include <vector>

namespace golden {

struct Range {
    int first;
    int last;  // inclusive, 1-based; may exceed p before clamping
};

inline std::vector<Range> s1_ranges() {
    std::vector<Range> r;
    for (int l = 0; l < 24; ++l) r.push_back({1 + 8 * l, 10 + 8 * l});
    return r;
}

inline std::vector<Range> s2_ranges() {
    std::vector<Range> r;
    for (int l = 0; l < 39; ++l) r.push_back({1 + 5 * l, 10 + 5 * l});
    return r;
}

inline std::vector<Range> s3_ranges() {
    std::vector<Range> r;
    for (int s = 1; s <= 97; s += 8) r.push_back({s, s + 9});
    for (int s = 102; s <= 122; s += 5) r.push_back({s, s + 9});
    for (int s = 132; s <= 192; s += 10) r.push_back({s, s + 9});
    return r;
}

inline std::vector<Range> s4_ranges() {
    std::vector<Range> r = {
        {1, 5},     {4, 8},     {7, 16},    {15, 24},   {23, 25},
        {24, 26},   {25, 39},   {38, 52},   {51, 70},   {69, 71},
        {70, 72},   {71, 73},   {72, 74},   {73, 75},   {74, 78},
        {77, 81},   {80, 84},   {83, 87},   {86, 90},   {89, 98},
        {97, 106},  {105, 114}, {113, 122}, {121, 130}, {129, 143},
        {142, 156}, {155, 174}, {173, 192}};
    for (int g = 193; g <= 200; ++g) r.push_back({g, g});
    return r;
}

inline std::vector<Range> s5_ranges() {
    std::vector<Range> r = {
        {1, 6},     {2, 7},     {3, 10},    {6, 13},    {9, 18},
        {14, 23},   {19, 33},   {29, 43},   {39, 58},   {54, 73},
        {69, 74},   {70, 75},   {71, 76},   {72, 79},   {75, 82},
        {78, 85},   {81, 90},   {86, 95},   {91, 100},  {96, 105},
        {101, 110}, {106, 120}, {116, 130}, {126, 140}, {136, 150},
        {146, 160}, {156, 175}, {171, 190}};
    for (int g = 191; g <= 200; ++g) r.push_back({g, g});
    return r;
}

inline std::vector<Range> s6_ranges() {
    std::vector<Range> r = {
        {1, 3},     {2, 4},     {3, 7},     {6, 10},    {9, 18},
        {17, 26},   {25, 39},   {38, 52},   {51, 70},   {69, 88},
        {87, 91},   {90, 94},   {93, 97},   {96, 101},  {100, 105},
        {104, 109}, {108, 115}, {114, 121}, {120, 127}, {126, 135},
        {131, 140}, {136, 150}, {146, 160}, {156, 175}, {171, 190}};
    for (int g = 191; g <= 200; ++g) r.push_back({g, g});
    return r;
}

inline std::vector<Range> lowdim_ranges(int p) {
    std::vector<Range> r;
    int count = 0, size = 0;
    if (p == 10) { count = 2; size = 6; }
    if (p == 20) { count = 3; size = 8; }
    if (p == 32) { count = 5; size = 8; }
    if (p == 50) { count = 6; size = 10; }
    int at = 1;
    for (int l = 0; l < count; ++l) {
        r.push_back({at, at + size - 1});
        at += size - 2;
    }
    return r;
}

using Listing = std::pair<std::vector<int>, std::vector<double>>;

inline Listing first_subgroup() {
    return {{1, 3, 6, 9, 10, 11, 13, 16, 20, 21, 25, 27, 29, 31, 33},
            {2, 1, 0.5, -1, 1.5, 0.5, -1, 2, -1, 0.5, -1, 0.5, 1.5, 0.5, 1}};
}

inline Listing second_subgroup() {
    return {{2, 3, 5, 9, 10, 12, 14, 17, 18, 19, 22, 23, 26, 31, 33},
            {-2, 1, -2, -1, 0.5, 1.5, 1, -1, -0.5, 2, -0.5, 1, -2, -0.5, -1}};
}

// Printed as {0, 3, 4, ...}; the leading 0 is transcribed as gene 1.
inline Listing third_subgroup() {
    return {{1, 3, 4, 6, 7, 10, 11, 12, 15, 17, 24, 25, 31, 32, 34},
            {-1, 1, -2, -0.5, 1, 2, -1, 2, 0.5, -1, 1, 1.5, 0.5, 1, -1.5}};
}

inline Listing lowdim_subgroup(int p, int which) {
    if (p == 10) {
        return which == 0 ? Listing{{1, 2, 4}, {2, 1, 0.5}}
                          : Listing{{3, 4, 6}, {-2, 1, -0.5}};
    }
    if (p == 20) {
        return which == 0
                   ? Listing{{1, 2, 6, 8, 10, 11}, {2, 1, 0.5, -1, 1.5, -2}}
                   : Listing{{1, 3, 4, 7, 10, 14}, {-2, 1, 0.5, -1, 1.5, 2}};
    }
    // p = 32 or 50; six printed coefficients, five genes -> drop trailing -2.
    return which == 0 ? Listing{{1, 8, 10, 13, 16}, {2, 1, 0.5, -1, 1.5}}
                      : Listing{{1, 4, 7, 10, 14, 19}, {-2, 1, 0.5, -1, 1.5, 2}};
}

}  // namespace golden
