#pragma once

#include <gtest/gtest.h>

#include "mitotype/error.hpp"
#include "mitotype/image.hpp"
#include "mitotype/random.hpp"

/// Asserts that `stmt` throws mitotype::Error with the given code.
#define EXPECT_ERROR_CODE(stmt, expected_code)                                                                       \
    do {                                                                                                             \
        try {                                                                                                        \
            stmt;                                                                                                    \
            ADD_FAILURE() << "expected " << mitotype::to_string(expected_code) << " from " #stmt;                    \
        } catch (const mitotype::Error& e_) {                                                                        \
            EXPECT_EQ(e_.code(), expected_code) << e_.what();                                                        \
        }                                                                                                            \
    } while (0)

namespace testutil {

inline mitotype::RasterImage random_image(std::size_t w, std::size_t h, std::uint64_t seed) {
    mitotype::Rng rng(seed);
    mitotype::RasterImage img(w, h);
    for (auto& s : img.samples()) s = static_cast<std::uint8_t>(rng.below(256));
    return img;
}

inline mitotype::GrayImage random_gray(std::size_t w, std::size_t h, std::uint64_t seed) {
    mitotype::Rng rng(seed);
    mitotype::GrayImage img(w, h);
    for (auto& s : img.values()) s = static_cast<std::uint8_t>(rng.below(256));
    return img;
}

} // namespace testutil
