#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "cn3d/error.hpp"
#include "cn3d/pipeline.hpp"
#include "cn3d/voxelize.hpp"

using namespace cn3d;

namespace {

GridConfig small_grid() {
  GridConfig g;
  g.x_min = 0.0;
  g.x_max = 3.2;
  g.y_min = -1.6;
  g.y_max = 1.6;
  g.z_min = -2.0;
  g.z_max = 0.0;
  g.vx = g.vy = 0.2;
  g.vz = 0.5;
  g.downsample = 4;
  g.voxel_cap = 5;
  return g;
}

PointCloud random_cloud(Rng& rng, const GridConfig& g, std::size_t n) {
  PointCloud c;
  for (std::size_t i = 0; i < n; ++i) {
    c.points.push_back({rng.uniform(g.x_min - 0.5, g.x_max + 0.5),
                        rng.uniform(g.y_min - 0.5, g.y_max + 0.5),
                        rng.uniform(g.z_min - 0.2, g.z_max + 0.2), rng.uniform()});
  }
  return c;
}

}  // namespace

TEST(GridConfig, Validation) {
  EXPECT_NO_THROW(GridConfig{}.validate());
  GridConfig g;
  EXPECT_EQ(g.x_cells(), 1400u);
  EXPECT_EQ(g.y_cells(), 1600u);
  EXPECT_EQ(g.z_cells(), 40u);
  EXPECT_EQ(g.feature_rows(), 350u);
  EXPECT_EQ(g.feature_cols(), 400u);
  g.vx = 0.03;
  EXPECT_THROW(g.validate(), InvalidArgument);
  g = GridConfig{};
  g.downsample = 3;
  EXPECT_THROW(g.validate(), InvalidArgument);
  g = GridConfig{};
  g.downsample = 0;
  EXPECT_THROW(g.validate(), InvalidArgument);
}

TEST(GridConfig, KeyValues) {
  const auto g = grid_config_from_kv(KeyValues::parse(
      "grid.x_range = 0 25.6\ngrid.y_range = -12.8 12.8\ngrid.voxel = 0.2 0.2 0.1\n"));
  EXPECT_EQ(g.x_max, 25.6);
  EXPECT_EQ(g.vx, 0.2);
  EXPECT_EQ(g.feature_rows(), 32u);
  EXPECT_THROW(run_config_from_kv(KeyValues::parse("grid.bogus = 1\n")), InvalidArgument);
}

TEST(Voxelize, Examples) {
  PointCloud c;
  c.points = {{0.07, 0.0, -2.95, 0.1}};
  const auto grid = voxelize_mean(c, GridConfig{});
  ASSERT_EQ(grid.occupied.size(), 1u);
  const VoxelIndex idx = grid.occupied.begin()->first;
  EXPECT_EQ(idx.ix, 1);
  EXPECT_EQ(idx.iy, 800);
  EXPECT_EQ(idx.iz, 0);

  c.points = {{1.01, 1.01, -1.01, 0.2}, {1.03, 1.04, -1.02, 0.6}};
  const auto two = voxelize_mean(c, GridConfig{});
  ASSERT_EQ(two.occupied.size(), 1u);
  const VoxelFeature& f = two.occupied.begin()->second;
  EXPECT_EQ(f.count, 2);
  EXPECT_NEAR(f.x, 1.02, 1e-12);
  EXPECT_NEAR(f.y, 1.025, 1e-12);
  EXPECT_NEAR(f.intensity, 0.4, 1e-12);

  c.points = {{70.0, 0.0, 0.0, 0.0}, {-0.01, 0.0, 0.0, 0.0}, {1.0, 0.0, 1.0, 0.0}};
  const auto none = voxelize_mean(c, GridConfig{});
  EXPECT_TRUE(none.occupied.empty());
  EXPECT_EQ(none.dropped_out_of_range, 3u);
}

TEST(Voxelize, CapKeepsFirstPoints) {
  GridConfig g = small_grid();
  g.voxel_cap = 2;
  PointCloud c;
  c.points = {{0.1, 0.1, -1.9, 0.0}, {0.1, 0.1, -1.9, 1.0}, {0.15, 0.1, -1.9, 1.0}};
  const auto grid = voxelize_mean(c, g);
  ASSERT_EQ(grid.occupied.size(), 1u);
  EXPECT_EQ(grid.occupied.begin()->second.count, 2);
  EXPECT_NEAR(grid.occupied.begin()->second.x, 0.1, 1e-12);
  EXPECT_EQ(grid.dropped_over_cap, 1u);
  EXPECT_EQ(grid.retained_points(), 2u);
}

TEST(Voxelize, PartitionAndPermutationInvariance) {
  Rng rng(17);
  GridConfig g = small_grid();
  g.voxel_cap = 1000;
  for (int t = 0; t < 20; ++t) {
    PointCloud c = random_cloud(rng, g, 400);
    const auto a = voxelize_mean(c, g);
    std::size_t inside = 0;
    for (const auto& p : c.points) {
      inside += p.x >= g.x_min && p.x < g.x_max && p.y >= g.y_min && p.y < g.y_max &&
                p.z >= g.z_min && p.z < g.z_max;
    }
    EXPECT_EQ(a.retained_points(), inside);
    EXPECT_EQ(a.retained_points() + a.dropped_out_of_range, c.points.size());
    for (const auto& [idx, f] : a.occupied) {
      EXPECT_GE(f.count, 1);
      EXPECT_GE(idx.ix, 0);
      EXPECT_LT(idx.ix, static_cast<int>(g.x_cells()));
      EXPECT_GE(idx.iy, 0);
      EXPECT_LT(idx.iy, static_cast<int>(g.y_cells()));
      EXPECT_GE(idx.iz, 0);
      EXPECT_LT(idx.iz, static_cast<int>(g.z_cells()));
    }

    std::vector<std::size_t> order(c.points.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
      order[i] = i;
    }
    for (std::size_t i = order.size() - 1; i > 0; --i) {
      std::swap(order[i], order[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i)))]);
    }
    PointCloud shuffled;
    for (std::size_t i : order) {
      shuffled.points.push_back(c.points[i]);
    }
    const auto b = voxelize_mean(shuffled, g);
    ASSERT_EQ(a.occupied.size(), b.occupied.size());
    for (const auto& [idx, f] : a.occupied) {
      const auto& h = b.occupied.at(idx);
      EXPECT_EQ(f.count, h.count);
      EXPECT_NEAR(f.x, h.x, 1e-12);
      EXPECT_NEAR(f.y, h.y, 1e-12);
      EXPECT_NEAR(f.z, h.z, 1e-12);
      EXPECT_NEAR(f.intensity, h.intensity, 1e-12);
    }
  }
}

TEST(BevCollapse, EmptyAndSingle) {
  const GridConfig g = small_grid();
  const Grid2D empty = bev_collapse(voxelize_mean({}, g));
  EXPECT_EQ(empty.height(), 4u);
  EXPECT_EQ(empty.width(), 4u);
  EXPECT_EQ(empty.channels(), kBevChannels);
  for (double v : empty.data()) {
    EXPECT_EQ(v, 0.0);
  }

  PointCloud c;
  c.points = {{1.7, 0.1, -0.7, 0.8}};  // ix 8, iy 8, iz 2
  const Grid2D one = bev_collapse(voxelize_mean(c, g));
  std::size_t nonzero_cells = 0;
  for (std::size_t r = 0; r < one.height(); ++r) {
    for (std::size_t col = 0; col < one.width(); ++col) {
      bool any = false;
      for (std::size_t ch = 0; ch < kBevChannels; ++ch) {
        any = any || one.at(r, col, ch) != 0.0;
      }
      nonzero_cells += any;
      if (any) {
        EXPECT_EQ(r, 2u);
        EXPECT_EQ(col, 2u);
      }
    }
  }
  EXPECT_EQ(nonzero_cells, 1u);
  EXPECT_NEAR(one.at(2, 2, 0), 1.0 / (16.0 * 4.0), 1e-12);
  EXPECT_NEAR(one.at(2, 2, 1), -0.7, 1e-12);
  EXPECT_NEAR(one.at(2, 2, 2), 0.8, 1e-12);
  EXPECT_NEAR(one.at(2, 2, 3), -0.75, 1e-12);  // center of z cell [-1, -0.5)
}

TEST(BevCollapse, OccupancyCountsVoxels) {
  Rng rng(2);
  const GridConfig g = small_grid();
  for (int t = 0; t < 20; ++t) {
    const auto grid = voxelize_mean(random_cloud(rng, g, 300), g);
    for (int stride : {1, 2, 4}) {
      const Grid2D bev = bev_collapse(grid, stride);
      double total = 0.0;
      for (std::size_t r = 0; r < bev.height(); ++r) {
        for (std::size_t col = 0; col < bev.width(); ++col) {
          total += bev.at(r, col, 0);
        }
      }
      EXPECT_NEAR(total * stride * stride * static_cast<double>(g.z_cells()),
                  static_cast<double>(grid.occupied.size()), 1e-9);
    }
  }
}
