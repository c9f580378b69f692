#include <doctest.h>

#include <cmath>

#include "hcontrib/error.hpp"
#include "hcontrib/info.hpp"
#include "expect_error.hpp"
#include "test_support.hpp"

using namespace hcontrib;
using hcontrib::testing::make_scores;
using hcontrib::testing::rel_close;
using hcontrib::testing::kind_of;
using hcontrib::testing::Rng;

namespace {

}  // namespace

TEST_SUITE("info") {

TEST_CASE("self_information sums surprisal") {
  CHECK(self_information(make_scores({0.0, 0.0})) == 0.0);
  CHECK(self_information(make_scores({std::log(0.5), std::log(0.5)})) == doctest::Approx(1.3862943611198906));
  CHECK(self_information(make_scores({std::log(0.25), std::log(0.25), std::log(0.25)})) ==
        doctest::Approx(4.1588830833596715));
  CHECK(kind_of([] { self_information(make_scores({-1.0, -INFINITY})); }) == ErrorKind::NonFiniteScore);
  CHECK(kind_of([] { self_information(make_scores({NAN})); }) == ErrorKind::NonFiniteScore);
}

TEST_CASE("mutual_information") {
  const auto u = make_scores({-1.0, -1.0});
  CHECK(mutual_information(u, u) == 0.0);
  CHECK(mutual_information(u, make_scores({0.0, 0.0})) == self_information(u));
  CHECK(mutual_information(make_scores({-1.5, -0.5}), make_scores({-0.25, -0.25})) == doctest::Approx(1.5));

  auto other = u;
  other.tokens[1] = " different";
  CHECK(kind_of([&] { mutual_information(u, other); }) == ErrorKind::ScoreMismatch);
  CHECK(kind_of([&] { mutual_information(u, make_scores({-1.0})); }) == ErrorKind::ScoreMismatch);
}

TEST_CASE("contribution_ratio") {
  const auto u = make_scores({-1.0, -1.0});
  CHECK(contribution_ratio(u, u) == 0.0);
  CHECK(contribution_ratio(u, make_scores({0.0, 0.0})) == 1.0);
  CHECK(contribution_ratio(u, make_scores({-0.5, -0.5})) == doctest::Approx(0.5));
  // Conditioning that hurts is reported as a negative ratio, not clamped.
  CHECK(contribution_ratio(u, make_scores({-2.0, -2.0})) == doctest::Approx(-1.0));
  CHECK(kind_of([] { contribution_ratio(make_scores({0.0}), make_scores({0.0})); }) ==
        ErrorKind::DegenerateOutput);
}

TEST_CASE("minimal_contribution") {
  CHECK(minimal_contribution(make_scores({-0.3, -2.0, -7.0}), 1.0) == 1.0);

  std::vector<double> lp(50, -2.0);  // I(y) = 100 nats over 50 tokens
  CHECK(minimal_contribution(make_scores(lp), 0.65) == doctest::Approx(0.7846085419537728).epsilon(1e-12));

  std::vector<double> at_tau(17, std::log(0.65));
  CHECK(std::abs(minimal_contribution(make_scores(at_tau), 0.65)) < 1e-12);

  CHECK(kind_of([] { minimal_contribution(make_scores({-1.0}), 0.0); }) == ErrorKind::InvalidThreshold);
  CHECK(kind_of([] { minimal_contribution(make_scores({-1.0}), 1.2); }) == ErrorKind::InvalidThreshold);
  CHECK(kind_of([] { minimal_contribution(make_scores({0.0, 0.0}), 0.5); }) == ErrorKind::DegenerateOutput);
  // Output cheaper than tau per token: the bound goes negative.
  CHECK(minimal_contribution(make_scores({std::log(0.9), std::log(0.9)}), 0.65) < 0.0);
}

TEST_CASE("plausibility_check") {
  CHECK(plausibility_check(make_scores({std::log(0.7), std::log(0.7), std::log(0.7)}), 0.65));
  CHECK(plausibility_check(make_scores({0.0, 0.0}), 0.99));
  CHECK_FALSE(plausibility_check(make_scores({std::log(0.7), std::log(0.6)}), 0.65));
  CHECK(kind_of([] { plausibility_check(make_scores({-1.0}), -0.1); }) == ErrorKind::InvalidThreshold);
}

TEST_CASE("build_report paths") {
  const auto u = make_scores({-1.0, -1.0});
  const auto c = make_scores({-0.25, -0.25});

  SUBCASE("estimation only") {
    auto r = build_report(u, std::nullopt, 0.65);
    CHECK(r.phi_min.has_value());
    CHECK_FALSE(r.phi.has_value());
    CHECK_FALSE(r.plausible.has_value());
    CHECK(r.token_count == 2);
  }
  SUBCASE("measurement only") {
    auto r = build_report(u, c, std::nullopt);
    CHECK(r.phi.has_value());
    CHECK_FALSE(r.phi_min.has_value());
    CHECK_FALSE(r.plausible.has_value());
  }
  SUBCASE("both") {
    auto r = build_report(u, c, 0.65);
    CHECK(r.self_info == 2.0);
    CHECK(*r.cond_self_info == 0.5);
    CHECK(*r.mutual_info == 1.5);
    CHECK(*r.phi == doctest::Approx(0.75));
    CHECK(*r.phi_min == doctest::Approx(0.5692170839075458).epsilon(1e-12));
    CHECK(*r.plausible);
    CHECK(*r.mutual_info == r.self_info - *r.cond_self_info);
    CHECK(*r.phi == *r.mutual_info / r.self_info);
  }
}

TEST_CASE("zero-probability tokens need an explicit floor") {
  const auto u = make_scores({-1.0, -INFINITY});
  const auto c = make_scores({-0.5, -0.5});
  CHECK(kind_of([&] { build_report(u, c, 0.65); }) == ErrorKind::NonFiniteScore);

  ReportOptions opts;
  opts.logprob_floor = kDefaultLogprobFloor;
  auto r = build_report(u, c, 0.65, opts);
  CHECK(r.self_info == doctest::Approx(31.0));
  CHECK(r.has_flag("floored-logprob"));

  auto clean = build_report(make_scores({-1.0, -1.0}), c, 0.65, opts);
  CHECK_FALSE(clean.has_flag("floored-logprob"));
}

TEST_CASE("display clamp is opt-in") {
  auto r = build_report(make_scores({-1.0, -1.0}), make_scores({-2.0, -2.0}), 0.3);
  CHECK(*r.phi < 0.0);
  CHECK(r.flags.empty());
  auto shown = clamp_for_display(r);
  CHECK(*shown.phi == 0.0);
  CHECK(*shown.phi_min == 0.0);
  CHECK(shown.has_flag("clamped"));
}

TEST_CASE("validate enforces the TokenScores invariants") {
  CHECK_NOTHROW(validate(make_scores({-1.0, -0.5})));
  auto bad = make_scores({-1.0, -0.5});
  bad.offsets[1] = 5;
  CHECK(kind_of([&] { validate(bad); }) == ErrorKind::InvalidScores);
  bad = make_scores({-1.0, 0.5});
  CHECK(kind_of([&] { validate(bad); }) == ErrorKind::InvalidScores);
  bad = make_scores({-1.0});
  bad.tokens.push_back("x");
  CHECK(kind_of([&] { validate(bad); }) == ErrorKind::InvalidScores);
  CHECK(kind_of([] { validate(TokenScores{}); }) == ErrorKind::InvalidScores);
}

TEST_CASE("randomized identities") {
  Rng rng(20240611);
  int dominance_checked = 0;
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t n = 1 + rng.index(40);
    std::vector<double> u(n), c(n);
    for (std::size_t i = 0; i < n; ++i) {
      u[i] = std::log(rng.uniform(1e-6, 1.0));
      c[i] = std::log(rng.uniform(1e-6, 1.0));
    }
    const auto us = make_scores(u);
    const auto cs = make_scores(c);
    const double info = self_information(us);
    const double cond_info = self_information(cs);
    const double phi = contribution_ratio(us, cs);
    const double tau = rng.uniform(0.05, 1.0);
    const double phi_min = minimal_contribution(us, tau);

    CHECK(rel_close(phi, 1.0 - cond_info / info));
    CHECK(phi <= 1.0);
    CHECK(phi_min <= 1.0);

    // Base-2 recomputation gives the same ratios.
    double bits_u = 0, bits_c = 0;
    for (std::size_t i = 0; i < n; ++i) {
      bits_u -= u[i] / std::log(2.0);
      bits_c -= c[i] / std::log(2.0);
    }
    CHECK(rel_close(phi, (bits_u - bits_c) / bits_u));
    CHECK(rel_close(phi_min, (bits_u + static_cast<double>(n) * std::log2(tau)) / bits_u));

    const bool plausible = plausibility_check(cs, tau);
    CHECK(plausible == (cond_info < -static_cast<double>(n) * std::log(tau)));
    if (plausible) {
      ++dominance_checked;
      CHECK(phi_min <= phi);
    }

    const double tau2 = std::min(1.0, tau + rng.uniform(1e-6, 0.2));
    if (tau2 > tau) CHECK(minimal_contribution(us, tau2) > phi_min);
  }
  CHECK(dominance_checked > 0);
}

}  // TEST_SUITE
