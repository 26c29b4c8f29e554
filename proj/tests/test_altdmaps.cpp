#include <doctest.h>

#include <filesystem>
#include <numeric>

#include "specsize/altdmaps.hpp"
#include "test_support.hpp"

using namespace specsize;
using namespace specsize::testing;

TEST_CASE("identical sensors collapse to the squared single-sensor spectrum") {
  Matrix x = random_matrix(80, 4, 3);
  KernelParams p{epsilon_median_heuristic(pairwise_sq_distances(x)), true};
  auto alt = fit_altdmaps(x, x, p, p, 6);
  auto single = fit_dmaps(x, p, 6);
  CHECK((alt.eigenvalues - single.eigenvalues.cwiseAbs2()).cwiseAbs().maxCoeff() < 1e-8);

  const Matrix k = markov_kernel(x, p);
  const Matrix k_alt = alternating_operator(x, x, p, p);
  CHECK((k_alt - k * k).cwiseAbs().maxCoeff() < 1e-15);

  // Same eigenvectors up to scale and sign.
  Matrix a = alt.coordinates, s = single.eigenvectors;
  for (Index c = 0; c < 6; ++c) {
    a.col(c).normalize();
    s.col(c).normalize();
  }
  CHECK(sign_aligned_max_diff(a, s) < 1e-8);
}

TEST_CASE("alternating operator is row-stochastic with a constant leading eigenvector") {
  auto d = make_two_sensor(150, 4.0, 11);
  KernelParams p1{epsilon_median_heuristic(pairwise_sq_distances(d.sensor1)), true};
  KernelParams p2{epsilon_median_heuristic(pairwise_sq_distances(d.sensor2)), false};
  const Matrix k_alt = alternating_operator(d.sensor1, d.sensor2, p1, p2);
  CHECK((k_alt.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-12);
  auto alt = fit_altdmaps(d.sensor1, d.sensor2, p1, p2, 5);
  CHECK(std::abs(alt.eigenvalues(0) - 1.0) < 1e-8);
  CHECK((alt.coordinates.col(0).array() - 1.0).abs().maxCoeff() < 1e-8);
  for (Index c = 0; c < 5; ++c) {
    const Vector psi = alt.coordinates.col(c);
    CHECK((k_alt * psi - alt.eigenvalues(c) * psi).norm() <= 1e-8 * psi.norm());
  }
  CHECK_THROWS_AS(fit_altdmaps(d.sensor1, d.sensor2.topRows(100), p1, p2, 5), DataError);
  CHECK_THROWS_AS(fit_altdmaps(d.sensor1, d.sensor2, p1, p2, 150), ConfigError);
}

TEST_CASE("common variable is isolated from sensor-specific nuisances") {
  auto d = make_two_sensor(600, 6.0, 7);
  const double e1 = 0.5 * epsilon_median_heuristic(pairwise_sq_distances(d.sensor1));
  const double e2 = 0.5 * epsilon_median_heuristic(pairwise_sq_distances(d.sensor2));
  auto alt = fit_altdmaps(d.sensor1, d.sensor2, {e1, true}, {e2, true}, 8);
  auto single = fit_dmaps(d.sensor1, {e1, true}, 8);
  const double r2_alt = ols_r2(alt_coordinates(alt, {1, 2}), d.circle);
  const double r2_single = ols_r2(single.eigenvectors.middleCols(1, 2), d.circle);
  CHECK(r2_alt > 0.9);
  CHECK(r2_alt > r2_single);
  // Both circle coordinates are flagged as independent directions.
  REQUIRE(alt.selection.indices.size() >= 2);
  CHECK(alt.selection.indices[0] == 1);
  CHECK(alt.selection.indices[1] == 2);
}

TEST_CASE("alt_coordinates") {
  Matrix x = random_matrix(40, 3, 5);
  Matrix y = random_matrix(40, 1, 6);
  KernelParams p{epsilon_median_heuristic(pairwise_sq_distances(x)), true};
  KernelParams q{epsilon_median_heuristic(pairwise_sq_distances(y)), true};
  auto alt = fit_altdmaps(x, y, p, q, 6);
  Matrix c0 = alt_coordinates(alt, {0});
  CHECK((c0.array() - c0(0, 0)).abs().maxCoeff() < 1e-8);
  CHECK_THROWS_AS(alt_coordinates(alt, {6}), ConfigError);

  IndexList perm(40);
  std::iota(perm.begin(), perm.end(), Index{0});
  Rng rng(9);
  rng.shuffle(perm);
  auto altp = fit_altdmaps(take_rows(x, perm), take_rows(y, perm), p, q, 6);
  CHECK((alt.eigenvalues - altp.eigenvalues).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(sign_aligned_max_diff(take_rows(alt_coordinates(alt, {1, 2, 3}), perm),
                              alt_coordinates(altp, {1, 2, 3})) < 1e-8);
}

TEST_CASE("AltDMAP manifest round trip") {
  Matrix x = random_matrix(30, 3, 15);
  Matrix y = random_matrix(30, 1, 16);
  auto alt = fit_altdmaps(x, y, {1.0, true}, {0.5, true}, 4);
  std::vector<std::string> ids;
  for (int i = 0; i < 30; ++i) ids.push_back("id" + std::to_string(i));
  auto dir = std::filesystem::temp_directory_path() / "specsize_alt_io";
  std::filesystem::remove_all(dir);
  save_altdmap(alt, ids, dir);
  std::vector<std::string> back_ids;
  auto back = load_altdmap(dir, &back_ids);
  CHECK(back_ids == ids);
  CHECK(back.coordinates == alt.coordinates);
  CHECK(back.eigenvalues == alt.eigenvalues);
  CHECK(back.selection.indices == alt.selection.indices);
  CHECK(back.params2.epsilon == 0.5);
  CHECK(back.sensor1 == alt.sensor1);
  CHECK_THROWS_AS(save_altdmap(alt, {"a"}, dir), DataError);
}
