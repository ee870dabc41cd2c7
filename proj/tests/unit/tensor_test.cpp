#include <gtest/gtest.h>

#include <random>

#include "alignkit/parallel.hpp"
#include "alignkit/tensor.hpp"
#include "test_util.hpp"

using namespace alignkit;

TEST(Tensor, ConstructsWithFillAndPayload) {
  Tensor t({2, 3, 4}, 1.5f);
  EXPECT_EQ(t.size(), 24u);
  EXPECT_EQ(t.rank(), 3);
  EXPECT_FLOAT_EQ(t.at(1, 2, 3), 1.5f);

  Tensor u({2, 2}, std::vector<float>{1, 2, 3, 4});
  EXPECT_FLOAT_EQ(u[3], 4.0f);
}

TEST(Tensor, RejectsBadExtentsAndPayload) {
  EXPECT_THROW(Tensor({2, 0, 3}), ShapeError);
  EXPECT_THROW(Tensor({-1}), ShapeError);
  EXPECT_THROW(Tensor({2, 2}, std::vector<float>{1, 2, 3}), ShapeError);
}

TEST(Tensor, RowMajorLayout) {
  Tensor t({2, 3, 4});
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<float>(i);
  EXPECT_FLOAT_EQ(t.at(1, 2, 3), 23.0f);
  EXPECT_FLOAT_EQ(t.at(1, 0, 0), 12.0f);
  EXPECT_FLOAT_EQ(t.plane(1)[5], 17.0f);
}

TEST(Tensor, ReshapeKeepsPayload) {
  Tensor t({2, 6}, std::vector<float>{0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11});
  const Tensor r = t.reshaped({3, 2, 2});
  EXPECT_EQ(r.vec(), t.vec());
  EXPECT_THROW(t.reshaped({5, 2}), ShapeError);
}

TEST(Tensor, ShapeMismatchNamesTheAxis) {
  const Tensor a({3, 4, 5}), b({3, 4, 6});
  try {
    require_same_dims(a, b, "test");
    FAIL() << "no throw";
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("width"), std::string::npos) << e.what();
  }
  try {
    require_same_dims(Tensor({2, 4, 5}), a, "test");
    FAIL() << "no throw";
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("channel"), std::string::npos) << e.what();
  }
}

TEST(Tensor, ElementwiseOps) {
  const Tensor a({1, 2, 2}, std::vector<float>{1, 2, 3, 4});
  const Tensor b({1, 2, 2}, std::vector<float>{4, 3, 2, 1});
  EXPECT_EQ((a + b).vec(), std::vector<float>(4, 5.0f));
  EXPECT_EQ((a - a).vec(), std::vector<float>(4, 0.0f));
  EXPECT_FLOAT_EQ((a * 2.0f)[3], 8.0f);
  EXPECT_THROW(a + Tensor({1, 2, 3}), ShapeError);
  EXPECT_DOUBLE_EQ(sum(a), 10.0);
  EXPECT_DOUBLE_EQ(mean(a), 2.5);
  EXPECT_FLOAT_EQ(max_abs_diff(a, b), 3.0f);
}

TEST(Tensor, ConcatAndSliceRoundTrip) {
  std::mt19937 gen(1);
  const Tensor a = testutil::random_tensor({3, 5, 4}, gen);
  const Tensor b = testutil::random_tensor({2, 5, 4}, gen);
  const Tensor c = concat_channels({&a, &b});
  EXPECT_EQ(c.channels(), 5);
  EXPECT_EQ(slice_channels(c, 0, 3), a);
  EXPECT_EQ(slice_channels(c, 3, 5), b);
  const Tensor bad({1, 4, 4});
  EXPECT_THROW(concat_channels({&a, &bad}), ShapeError);
  EXPECT_THROW(slice_channels(c, 4, 4), ShapeError);
}

TEST(FlowField, LayoutAndValidation) {
  FlowField f = FlowField::uniform(3, 4, 1.5f, -2.0f);
  EXPECT_FLOAT_EQ(f.dx(2, 3), 1.5f);
  EXPECT_FLOAT_EQ(f.dy(0, 0), -2.0f);
  EXPECT_FLOAT_EQ(f.tensor().at(0, 1, 1), 1.5f);
  EXPECT_FLOAT_EQ(f.tensor().at(1, 1, 1), -2.0f);

  EXPECT_THROW(FlowField(Tensor({3, 4, 4})), ShapeError);
  Tensor nan({2, 2, 2});
  nan[3] = std::numeric_limits<float>::quiet_NaN();
  EXPECT_THROW(FlowField{nan}, NonFiniteError);
}

TEST(Parallel, ThreadCapFromEnvironment) {
  setenv("ALIGNKIT_THREADS", "3", 1);
  EXPECT_EQ(worker_count(), 3);
  setenv("ALIGNKIT_THREADS", "garbage", 1);
  EXPECT_EQ(worker_count(), 1);
  unsetenv("ALIGNKIT_THREADS");
  EXPECT_GE(worker_count(), 1);
}

TEST(Parallel, VisitsEveryItemOnceAndPropagatesErrors) {
  setenv("ALIGNKIT_THREADS", "4", 1);
  std::vector<int> hits(1000, 0);
  parallel_for(hits.size(), [&](std::size_t i) { hits[i] += 1; });
  EXPECT_EQ(std::count(hits.begin(), hits.end(), 1), 1000);
  EXPECT_THROW(parallel_for(10, [](std::size_t i) {
                 if (i == 7) throw InvalidArgument("boom");
               }),
               InvalidArgument);
  unsetenv("ALIGNKIT_THREADS");
}
