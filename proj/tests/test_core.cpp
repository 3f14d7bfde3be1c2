#include <gtest/gtest.h>

#include <random>

#include "opguide/core.hpp"
#include "opguide/fixtures.hpp"

using namespace opguide;

TEST(Flatten, RowMajorSingleChannel) {
  Image img(2, 2, 1);
  img.data = {1.0, 2.0, 3.0, 4.0};
  EXPECT_EQ(flatten(img, 0), (Signal{1.0, 2.0, 3.0, 4.0}));
}

TEST(Flatten, OnePixel) {
  Image img(1, 1, 1, 0.25);
  EXPECT_EQ(flatten(img, 0), Signal{0.25});
}

TEST(Flatten, PicksInterleavedChannel) {
  Image img(2, 1, 3);
  img.data = {1, 2, 3, 4, 5, 6};
  EXPECT_EQ(flatten(img, 1), (Signal{2, 5}));
  EXPECT_THROW(flatten(img, 3), std::out_of_range);
}

TEST(Flatten, RoundTripsAllShapes) {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<std::size_t> side(1, 9);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t w = side(rng), h = side(rng), c = trial % 2 ? 3 : 1;
    Image img(w, h, c);
    img.data = fixtures::random_signal(w * h * c, trial);
    Image back(w, h, c);
    for (std::size_t ch = 0; ch < c; ++ch) unflatten_into(back, ch, flatten(img, ch));
    EXPECT_EQ(back, img);
  }
}

TEST(Unflatten, RejectsWrongLength) {
  Signal v(5);
  EXPECT_THROW(unflatten(v, 2, 2), std::invalid_argument);
}

TEST(Dot, HandArithmetic) {
  const Signal a{1, 2}, b{3, 4};
  EXPECT_EQ(dot(a, b), 11.0);
  const Signal e1{1, 0}, e2{0, 1};
  EXPECT_EQ(dot(e1, e2), 0.0);
}

TEST(Dot, SelfProductNonnegative) {
  for (int s = 0; s < 20; ++s) {
    const Signal v = fixtures::random_signal(37, s);
    EXPECT_GE(dot(v, v), 0.0);
  }
}

TEST(Dot, LengthMismatchThrows) {
  const Signal a{1, 2}, b{1};
  EXPECT_THROW(dot(a, b), std::invalid_argument);
}

TEST(LinearOperator, EnforcesDimensions) {
  LinearOperator bad(3, 3, false, [](std::span<const double>) { return Signal(2); });
  const Signal v(3, 1.0);
  EXPECT_THROW(bad.apply(v), std::invalid_argument);
  EXPECT_THROW(identity_operator(3).apply(Signal(4)), std::invalid_argument);
}

TEST(LinearOperator, SymmetryDefectOfSymmetricOperators) {
  const LinearOperator id = identity_operator(10);
  const LinearOperator diag = diagonal_operator(fixtures::random_signal(10, 9));
  for (int s = 0; s < 100; ++s) {
    const Signal v = fixtures::random_signal(10, 2 * s), w = fixtures::random_signal(10, 2 * s + 1);
    EXPECT_LE(symmetry_defect(id, v, w), 1e-10);
    EXPECT_LE(symmetry_defect(diag, v, w), 1e-10);
  }
}

TEST(LinearOperator, SymmetryDefectDetectsNonsymmetric) {
  // [[0, 1], [0, 0]]
  LinearOperator shift(2, 2, false, [](std::span<const double> v) { return Signal{v[1], 0.0}; });
  const Signal v{1.0, 0.0}, w{0.0, 1.0};
  EXPECT_GT(symmetry_defect(shift, w, v), 0.1);
}
