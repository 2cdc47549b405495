#include <doctest.h>

#include <cstdio>
#include <cstring>
#include <random>
#include <string>

#include "fblab/gfn_io.hpp"
#include "fblab/lattice.hpp"

using namespace fblab;

TEST_SUITE("gfn_io") {

TEST_CASE("round-trip is bit-exact") {
  Grid g = make_grid({{-1.0, 1.0}, {-0.5, 0.5}}, 1.0 / 32);
  std::mt19937 rng(99u);
  std::uniform_real_distribution<double> dist(-3.0, 3.0);
  GridFunction u;
  u.grid = g;
  u.role = FieldRole::Signed;
  u.values.resize(g.node_count());
  for (double& v : u.values) v = dist(rng);
  u.values[17] = 0.0;
  u.values[42] = -0.0;
  u.values[77] = 1e-308;

  std::string stem = "/tmp/fblab_test_roundtrip";
  write_gfn(stem, u);
  GridFunction r = read_gfn(stem + ".gfn");
  REQUIRE(r.values.size() == u.values.size());
  for (std::size_t i = 0; i < u.values.size(); ++i) {
    CHECK(std::memcmp(&r.values[i], &u.values[i], sizeof(double)) == 0);
  }
  CHECK(r.grid.h == u.grid.h);
  CHECK(r.grid.shape[0] == u.grid.shape[0]);
  CHECK(r.grid.shape[1] == u.grid.shape[1]);
  CHECK(r.role == u.role);
  std::remove((stem + ".gfn").c_str());
  std::remove((stem + ".gfn.json").c_str());
}

TEST_CASE("3d round-trip and role") {
  Grid g = make_grid({{0.0, 1.0}, {0.0, 1.0}, {0.0, 1.0}}, 0.25);
  GridFunction u = sample(g, FieldRole::Nonnegative,
                          [](const Vec& x) { return x[0] + x[1] + x[2]; });
  std::string stem = "/tmp/fblab_test_roundtrip3";
  write_gfn(stem, u);
  GridFunction r = read_gfn(stem);
  CHECK(r.grid.dim == 3);
  CHECK(r.role == FieldRole::Nonnegative);
  CHECK(r.values == u.values);
  std::remove((stem + ".gfn").c_str());
  std::remove((stem + ".gfn.json").c_str());
}

TEST_CASE("missing and malformed files are rejected") {
  CHECK_THROWS_AS(read_gfn("/tmp/fblab_does_not_exist"), ValidationError);
}

}  // TEST_SUITE
