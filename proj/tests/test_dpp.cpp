#include <catch2/catch.hpp>

#include "dprover/dpp.hpp"
#include "support/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <set>

using namespace dprover;
using namespace dprover::dpp;

namespace {

FeatureBank bank_from(std::vector<std::vector<double>> rows, std::vector<double> q) {
  return FeatureBank::from_rows(rows, q);
}

Kernel identity_kernel(std::size_t n) {
  return Kernel::from_matrix(Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(n),
                                                       static_cast<Eigen::Index>(n)));
}

std::map<Subset, std::size_t> draw(const Eigendecomposition &d, std::size_t k,
                                   std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::map<Subset, std::size_t> counts;
  for (std::size_t i = 0; i < n; ++i)
    ++counts[sample_k_dpp(d, k, rng)];
  return counts;
}

} // namespace

TEST_CASE("build_kernel examples", "[dpp]") {
  SECTION("orthonormal features give the identity") {
    const auto l = build_kernel(bank_from({{1, 0}, {0, 1}}, {1, 1}));
    CHECK(l.entries().isApprox(Eigen::Matrix2d::Identity()));
  }
  SECTION("parallel features span zero volume") {
    const auto l = build_kernel(bank_from({{1, 0}, {1, 0}}, {2, 1}));
    Eigen::Matrix2d expected;
    expected << 4, 2, 2, 1;
    CHECK(l.entries().isApprox(expected));
    CHECK(oracle::determinant(oracle::to_rows(l.entries())) == Approx(0.0).margin(1e-12));
  }
  SECTION("45 degree features") {
    const double h = 1.0 / std::sqrt(2.0);
    const auto l = build_kernel(bank_from({{1, 0}, {h, h}}, {1, 1}));
    CHECK(l(0, 0) == Approx(1.0));
    CHECK(l(0, 1) == Approx(h));
    CHECK(l(1, 0) == Approx(h));
    CHECK(l(1, 1) == Approx(1.0));
  }
}

TEST_CASE("FeatureBank rejects bad input", "[dpp][errors]") {
  CHECK_THROWS_AS(bank_from({{1, 0}, {0, 1, 0}}, {1, 1}), InvalidInput);
  CHECK_THROWS_AS(bank_from({{2, 0}}, {1}), InvalidInput);
  CHECK_THROWS_AS(bank_from({{1, 0}}, {0}), InvalidInput);
  CHECK_THROWS_AS(bank_from({{1, 0}}, {1, 2}), InvalidInput);
  Eigen::Matrix2d asym;
  asym << 1, 0.5, 0, 1;
  CHECK_THROWS_AS(Kernel::from_matrix(asym), InvalidInput);
}

TEST_CASE("eigendecompose examples", "[dpp]") {
  SECTION("identity") {
    const auto d = eigendecompose(identity_kernel(3));
    for (int i = 0; i < 3; ++i)
      CHECK(d.eigenvalues[i] == Approx(1.0));
    CHECK(d.rank() == 3);
  }
  SECTION("rank one 2x2") {
    Eigen::Matrix2d m;
    m << 4, 2, 2, 1;
    const auto d = eigendecompose(Kernel::from_matrix(m));
    CHECK(d.eigenvalues[0] == 0.0); // clamped exactly
    CHECK(d.eigenvalues[1] == Approx(5.0));
    CHECK(d.rank() == 1);
  }
  SECTION("zero matrix") {
    const auto d = eigendecompose(Kernel::from_matrix(Eigen::Matrix3d::Zero()));
    for (int i = 0; i < 3; ++i)
      CHECK(d.eigenvalues[i] == 0.0);
    CHECK(d.rank() == 0);
  }
  SECTION("clearly indefinite matrix is refused") {
    Eigen::Matrix2d m;
    m << 0, 1, 1, 0;
    CHECK_THROWS_AS(eigendecompose(Kernel::from_matrix(m)), NumericalError);
  }
  SECTION("random kernel reconstructs with orthonormal eigenvectors") {
    std::mt19937_64 rng(3);
    const auto l = build_kernel(oracle::random_bank(rng, 7, 5));
    const auto d = eigendecompose(l);
    const Eigen::MatrixXd &v = d.eigenvectors;
    CHECK((v.transpose() * v).isApprox(Eigen::MatrixXd::Identity(7, 7), 1e-10));
    const Eigen::MatrixXd rebuilt = v * d.eigenvalues.asDiagonal() * v.transpose();
    CHECK((rebuilt - l.entries()).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(d.rank() == 5);
    for (Eigen::Index i = 1; i < d.eigenvalues.size(); ++i)
      CHECK(d.eigenvalues[i - 1] <= d.eigenvalues[i]);
  }
}

TEST_CASE("esp_table examples", "[dpp]") {
  SECTION("eigenvalues 1, 2, 3") {
    const std::vector<double> lambda{1, 2, 3};
    const auto t = esp_table(lambda, 3);
    CHECK(t(0, 3) == 1.0);
    CHECK(t(1, 3) == 6.0);
    CHECK(t(2, 3) == 11.0);
    CHECK(t(3, 3) == 6.0);
    for (std::size_t l = 0; l <= 3; ++l)
      CHECK(t(l, 3) == Approx(oracle::esp(lambda, l)));
  }
  SECTION("all zero eigenvalues") {
    const std::vector<double> lambda(4, 0.0);
    const auto t = esp_table(lambda, 4);
    CHECK(t(0, 4) == 1.0);
    for (std::size_t l = 1; l <= 4; ++l)
      CHECK(t(l, 4) == 0.0);
  }
  SECTION("recursion holds everywhere") {
    const std::vector<double> lambda{0.3, 1.7, 2.2, 0.9, 4.1};
    const auto t = esp_table(lambda, 5);
    for (std::size_t n = 0; n <= 5; ++n)
      CHECK(t(0, n) == 1.0);
    for (std::size_t l = 1; l <= 5; ++l) {
      CHECK(t(l, 0) == 0.0);
      for (std::size_t n = 1; n <= 5; ++n)
        CHECK(t(l, n) == Approx(t(l, n - 1) + lambda[n - 1] * t(l - 1, n - 1)));
    }
  }
  SECTION("k larger than N is refused") {
    const std::vector<double> lambda{1, 2};
    CHECK_THROWS_AS(esp_table(lambda, 3), InvalidInput);
  }
}

TEST_CASE("subset_log_det examples", "[dpp]") {
  CHECK(subset_log_det(identity_kernel(3), Subset{}) == 0.0);
  CHECK(subset_log_det(identity_kernel(4), Subset{0, 2, 3}) == Approx(0.0).margin(1e-15));
  Eigen::Matrix2d m;
  m << 4, 2, 2, 1;
  const double singular = subset_log_det(Kernel::from_matrix(m), Subset{0, 1});
  CHECK(std::isinf(singular));
  CHECK(singular < 0.0);
  CHECK_THROWS_AS(subset_log_det(identity_kernel(3), Subset{1, 1}), InvalidInput);
  CHECK_THROWS_AS(subset_log_det(identity_kernel(3), Subset{0, 3}), InvalidInput);

  std::mt19937_64 rng(17);
  const auto l = build_kernel(oracle::random_bank(rng, 6, 6));
  const auto rows = oracle::to_rows(l.entries());
  oracle::subsets(6, 3, [&](const std::vector<std::size_t> &s) {
    CHECK(std::exp(subset_log_det(l, s)) ==
          Approx(oracle::determinant(oracle::principal_minor(rows, s))).epsilon(1e-9));
  });
}

TEST_CASE("exact_k_dpp_pmf examples", "[dpp]") {
  SECTION("identity kernel is uniform") {
    const auto pmf = exact_k_dpp_pmf(identity_kernel(5), 2);
    REQUIRE(pmf.size() == 10);
    for (const auto &[s, p] : pmf)
      CHECK(p == Approx(0.1));
  }
  SECTION("sums to one and matches the ESP normalizer") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 5; ++trial) {
      const auto l = build_kernel(oracle::random_bank(rng, 7, 4));
      for (std::size_t k = 1; k <= 4; ++k) {
        const auto pmf = exact_k_dpp_pmf(l, k);
        double sum = 0.0;
        for (const auto &[s, p] : pmf)
          sum += p;
        CHECK(std::abs(sum - 1.0) <= 1e-10);
        const auto d = eigendecompose(l);
        const double ek = esp_table(d.eigenvalues, k).normalizer();
        const double direct = oracle::determinant_sum(oracle::to_rows(l.entries()), k);
        CHECK(std::abs(direct - ek) / ek <= 1e-8);
      }
    }
  }
  SECTION("agrees with the elimination oracle") {
    std::mt19937_64 rng(8);
    const auto l = build_kernel(oracle::random_bank(rng, 6, 6));
    const auto ref = oracle::kdpp_pmf(oracle::to_rows(l.entries()), 3);
    const auto pmf = exact_k_dpp_pmf(l, 3);
    for (const auto &[s, p] : pmf)
      CHECK(p == Approx(ref.at(s)).margin(1e-12));
  }
  SECTION("order above the oracle limit is refused") {
    CHECK_THROWS_AS(exact_k_dpp_pmf(identity_kernel(13), 2), InvalidInput);
  }
}

TEST_CASE("exact pmf properties", "[dpp][property]") {
  std::mt19937_64 rng(21);
  SECTION("quality scale invariance") {
    for (int trial = 0; trial < 10; ++trial) {
      const auto bank = oracle::random_bank(rng, 6, 4);
      const auto base = exact_k_dpp_pmf(build_kernel(bank), 3);
      for (double c : {0.1, 10.0}) {
        const FeatureBank scaled(bank.features(), bank.qualities() * c);
        const auto pmf = exact_k_dpp_pmf(build_kernel(scaled), 3);
        for (const auto &[s, p] : pmf)
          CHECK(std::abs(p - base.at(s)) <= 1e-10);
      }
    }
  }
  SECTION("permutation equivariance") {
    const auto bank = oracle::random_bank(rng, 6, 5);
    std::vector<std::size_t> perm(6);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    Eigen::MatrixXd f(bank.dim(), 6);
    Eigen::VectorXd q(6);
    for (std::size_t i = 0; i < 6; ++i) {
      f.col(static_cast<Eigen::Index>(i)) = bank.features().col(static_cast<Eigen::Index>(perm[i]));
      q[static_cast<Eigen::Index>(i)] = bank.qualities()[static_cast<Eigen::Index>(perm[i])];
    }
    const auto base = exact_k_dpp_pmf(build_kernel(bank), 2);
    const auto permuted = exact_k_dpp_pmf(build_kernel(FeatureBank(f, q)), 2);
    for (const auto &[s, p] : permuted) {
      Subset original{perm[s[0]], perm[s[1]]};
      std::sort(original.begin(), original.end());
      CHECK(p == Approx(base.at(original)).margin(1e-12));
    }
  }
}

TEST_CASE("sample_k_dpp examples", "[dpp][statistical]") {
  SECTION("identity kernel N=4 k=2 is uniform") {
    const auto d = eigendecompose(identity_kernel(4));
    const std::size_t n = 100000;
    const auto counts = draw(d, 2, n, 1);
    CHECK(counts.size() == 6);
    CHECK(total_variation(exact_k_dpp_pmf(identity_kernel(4), 2), counts, n) < 0.01);
  }
  SECTION("parallel columns are never co-selected") {
    const double h = 1.0 / std::sqrt(2.0);
    const auto l = build_kernel(bank_from({{1, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, h, h}}, {1, 1, 1, 1}));
    const auto d = eigendecompose(l);
    const auto counts = draw(d, 2, 20000, 2);
    for (const auto &[s, c] : counts)
      CHECK_FALSE((s[0] == 0 && s[1] == 1));
  }
  SECTION("random PSD kernel N=5 k=2") {
    std::mt19937_64 rng(33);
    const auto l = build_kernel(oracle::random_bank(rng, 5, 4));
    const std::size_t n = 100000;
    const auto counts = draw(eigendecompose(l), 2, n, 4);
    CHECK(total_variation(oracle::kdpp_pmf(oracle::to_rows(l.entries()), 2), counts, n) < 0.01);
  }
  SECTION("k above rank is refused") {
    Eigen::Matrix2d m;
    m << 4, 2, 2, 1;
    const auto d = eigendecompose(Kernel::from_matrix(m));
    std::mt19937_64 rng(0);
    try {
      sample_k_dpp(d, 2, rng);
      FAIL("expected RankDeficient");
    } catch (const RankDeficient &e) {
      CHECK(e.requested() == 2);
      CHECK(e.rank() == 1);
    }
  }
  SECTION("k = 0 gives the empty set") {
    std::mt19937_64 rng(0);
    CHECK(sample_k_dpp(eigendecompose(identity_kernel(3)), 0, rng).empty());
  }
}

TEST_CASE("sampler cardinality and determinism", "[dpp][property]") {
  std::mt19937_64 gen(99);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 3 + gen() % 10;
    const std::size_t dim = 2 + gen() % 8;
    const auto d = eigendecompose(build_kernel(oracle::random_bank(gen, n, dim)));
    const std::size_t k = 1 + gen() % d.rank();
    std::mt19937_64 a(trial), b(trial);
    for (int s = 0; s < 50; ++s) {
      const auto x = sample_k_dpp(d, k, a);
      REQUIRE(x.size() == k);
      REQUIRE(std::set<std::size_t>(x.begin(), x.end()).size() == k);
      REQUIRE(std::is_sorted(x.begin(), x.end()));
      REQUIRE(x.back() < n);
      REQUIRE(x == sample_k_dpp(d, k, b));
    }
  }
}

TEST_CASE("sampler agrees with the oracle for small kernels", "[dpp][statistical]") {
  std::mt19937_64 gen(404);
  const std::size_t draws = 200000;
  for (std::size_t k = 1; k <= 3; ++k) {
    const auto l = build_kernel(oracle::random_bank(gen, 6, 4));
    const auto counts = draw(eigendecompose(l), k, draws, 1000 + k);
    const double tv = total_variation(exact_k_dpp_pmf(l, k), counts, draws);
    INFO("k = " << k << ", tv = " << tv);
    CHECK(tv < 0.01);
  }
}

TEST_CASE("total_variation", "[dpp]") {
  SubsetPmf pmf{{{0}, 0.5}, {{1}, 0.5}};
  CHECK(total_variation(pmf, {{{0}, 5}, {{1}, 5}}, 10) == 0.0);
  CHECK(total_variation(pmf, {{{0}, 10}}, 10) == Approx(0.5));
  CHECK(total_variation(pmf, {{{2}, 10}}, 10) == Approx(1.0));
  CHECK(total_variation(pmf, {}, 0) == 0.0);
}
