#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "hcontrib/error.hpp"
#include "hcontrib/stats.hpp"
#include "expect_error.hpp"
#include "test_support.hpp"

using namespace hcontrib;
using hcontrib::testing::kind_of;
using hcontrib::testing::Rng;

namespace {

// Plain textbook recomputation: explicit half vectors, explicit scan for whiskers.
BoxStats naive_box(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  auto med = [](const std::vector<double>& s) {
    const auto n = s.size();
    return n % 2 ? s[n / 2] : 0.5 * (s[n / 2 - 1] + s[n / 2]);
  };
  const auto n = v.size();
  std::vector<double> lower(v.begin(), v.begin() + static_cast<long>((n + 1) / 2));
  std::vector<double> upper(v.begin() + static_cast<long>(n / 2), v.end());
  BoxStats b;
  b.count = n;
  b.median = med(v);
  b.q1 = med(lower);
  b.q3 = med(upper);
  const double iqr = b.q3 - b.q1;
  b.lower_whisker = b.upper_whisker = b.median;
  bool have_low = false;
  for (double x : v) {
    if (x >= b.q1 - 1.5 * iqr && x <= b.q3 + 1.5 * iqr) {
      if (!have_low) b.lower_whisker = x;
      have_low = true;
      b.upper_whisker = x;
    } else {
      b.outliers.push_back(x);
    }
  }
  return b;
}

ContributionReport rep(std::string id, double phi, int round = 1) {
  ContributionReport r;
  r.record_id = std::move(id);
  r.phi = phi;
  r.round = round;
  return r;
}

}  // namespace

TEST_SUITE("stats") {

TEST_CASE("summarize examples") {
  const std::vector<double> five{1, 2, 3, 4, 5};
  const auto s = summarize(five);
  CHECK(s.median == 3);
  CHECK(s.q1 == 2);
  CHECK(s.q3 == 4);
  CHECK(s.lower_whisker == 1);
  CHECK(s.upper_whisker == 5);
  CHECK(s.outliers.empty());

  const auto one = summarize(std::vector<double>{5});
  CHECK(one.count == 1);
  CHECK((one.median == 5 && one.q1 == 5 && one.q3 == 5 && one.lower_whisker == 5 && one.upper_whisker == 5));
  CHECK(one.outliers.empty());

  const auto spike = summarize(std::vector<double>{0, 0, 0, 0, 100});
  CHECK(spike.q1 == 0);
  CHECK(spike.q3 == 0);
  CHECK(spike.upper_whisker == 0);
  CHECK(spike.outliers == std::vector<double>{100});

  const auto even = summarize(std::vector<double>{4, 1, 3, 2});
  CHECK(even.median == 2.5);
  CHECK(even.q1 == 1.5);
  CHECK(even.q3 == 3.5);

  CHECK(kind_of([] { summarize(std::vector<double>{}); }) == ErrorKind::EmptyInput);
  CHECK(kind_of([] { summarize(std::vector<double>{1.0, NAN}); }) == ErrorKind::InvalidArgument);
}

TEST_CASE("summarize matches a naive recomputation") {
  Rng rng(11);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng.index(40);
    std::vector<double> v;
    for (std::size_t i = 0; i < n; ++i) {
      // Coarse grid values create ties; occasional spikes create outliers.
      double x = std::round(rng.uniform(-5, 5) * 4) / 4;
      if (rng.index(10) == 0) x *= 20;
      v.push_back(x);
    }
    const auto got = summarize(v);
    const auto want = naive_box(v);
    REQUIRE(got.count == want.count);
    CHECK(got.median == want.median);
    CHECK(got.q1 == want.q1);
    CHECK(got.q3 == want.q3);
    CHECK(got.lower_whisker == want.lower_whisker);
    CHECK(got.upper_whisker == want.upper_whisker);
    CHECK(got.outliers == want.outliers);
    CHECK((got.q1 <= got.median && got.median <= got.q3));
  }
}

TEST_CASE("ordering_trend") {
  auto t = ordering_trend({{"a", {0.9}}, {"b", {0.5}}, {"c", {0.2}}});
  CHECK(t.decreasing);
  CHECK(t.margin == doctest::Approx(0.3).epsilon(1e-12));
  CHECK_FALSE(ordering_trend({{"a", {0.5}}, {"b", {0.5}}}).decreasing);
  CHECK_FALSE(ordering_trend({{"a", {0.1}}, {"b", {0.5}}}).decreasing);
  CHECK(kind_of([] { ordering_trend({{"a", {1.0}}}); }) == ErrorKind::InvalidArgument);
  CHECK(kind_of([] { ordering_trend({{"a", {1.0}}, {"b", {}}}); }) == ErrorKind::EmptyInput);
}

TEST_CASE("ordering_trend is invariant under monotone maps") {
  Rng rng(5);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t groups = 2 + rng.index(3);
    std::vector<LabeledValues> raw, cubed, logistic, affine;
    for (std::size_t g = 0; g < groups; ++g) {
      // Odd sizes: the median is a data point, so any increasing map carries it along.
      const std::size_t n = 2 * rng.index(6) + 1;
      std::vector<double> v;
      for (std::size_t i = 0; i < n; ++i) v.push_back(rng.uniform(-1, 1) - 0.4 * static_cast<double>(g));
      auto map = [&](auto f) {
        std::vector<double> out;
        for (double x : v) out.push_back(f(x));
        return out;
      };
      raw.emplace_back("g", v);
      cubed.emplace_back("g", map([](double x) { return x * x * x; }));
      logistic.emplace_back("g", map([](double x) { return 1.0 / (1.0 + std::exp(-3 * x)); }));
      // Midpoint medians of even sizes survive affine maps as well.
      v.push_back(rng.uniform(-1, 1));
      affine.emplace_back("g", map([](double x) { return 2.5 * x + 7; }));
    }
    const bool base = ordering_trend(raw).decreasing;
    CHECK(ordering_trend(cubed).decreasing == base);
    CHECK(ordering_trend(logistic).decreasing == base);
    std::vector<LabeledValues> even_raw;
    for (const auto& [label, values] : affine) {
      std::vector<double> back;
      for (double y : values) back.push_back((y - 7) / 2.5);
      even_raw.emplace_back(label, back);
    }
    CHECK(ordering_trend(affine).decreasing == ordering_trend(even_raw).decreasing);
  }
}

TEST_CASE("pairwise_consistency") {
  std::vector<ContributionReport> a{rep("f1/a", 0.9), rep("f2/a", 0.8), rep("f3/a", 0.1), rep("f4/a", 0.5)};
  std::vector<ContributionReport> b{rep("f1/b", 0.2), rep("f2/b", 0.3), rep("f3/b", 0.7), rep("f4/b", 0.45)};
  const auto half = pairwise_consistency(a, b, ExpectedOrder::AGreater);
  CHECK(half.paired == 4);
  CHECK(half.qualifying == 3);  // f4 gap 0.05
  CHECK(half.fraction == doctest::Approx(2.0 / 3.0));

  std::vector<ContributionReport> a2{rep("f1/a", 0.9), rep("f2/a", 0.1)};
  std::vector<ContributionReport> b2{rep("f1/b", 0.2), rep("f2/b", 0.7)};
  CHECK(pairwise_consistency(a2, b2, ExpectedOrder::AGreater).fraction == 0.5);
  CHECK(pairwise_consistency(a2, b2, ExpectedOrder::BGreater).fraction == 0.5);
  CHECK(pairwise_consistency({rep("f/a", 0.9)}, {rep("f/b", 0.1)}, ExpectedOrder::AGreater).fraction == 1.0);

  // The threshold is strict.
  CHECK(kind_of([] { pairwise_consistency({rep("f/a", 0.5)}, {rep("f/b", 0.375)}, ExpectedOrder::AGreater, 0.125); }) ==
        ErrorKind::NoQualifyingPairs);
  CHECK(kind_of([] { pairwise_consistency({rep("x/a", 0.9)}, {rep("y/b", 0.1)}, ExpectedOrder::AGreater); }) ==
        ErrorKind::NoQualifyingPairs);

  auto mixed = rep("f/b", 0.1);
  mixed.null_context = "Preamble.";
  const auto warned = pairwise_consistency({rep("f/a", 0.9)}, {mixed}, ExpectedOrder::AGreater);
  CHECK(warned.warning.has_value());

  const auto pooled = pool({half, warned});
  CHECK(pooled.qualifying == 4);
  CHECK(pooled.fraction == 0.75);
  CHECK(kind_of([] { pool({}); }) == ErrorKind::NoQualifyingPairs);
}

TEST_CASE("multi_round_reduction") {
  std::vector<ContributionReport> down{rep("c1", 0.5, 1), rep("c1#r2", 0.4, 2), rep("c1#r3", 0.3, 3),
                                       rep("c2", 0.6, 1), rep("c2#r2", 0.2, 2), rep("c2#r3", 0.1, 3)};
  CHECK(multi_round_reduction(down) == std::vector<double>{1.0, 1.0});
  CHECK(multi_round_reduction({rep("c", 0.1, 1), rep("c#r2", 0.3, 2)}) == std::vector<double>{0.0});

  std::vector<ContributionReport> mixed{rep("c1", 0.5, 1), rep("c1#r2", 0.6, 2), rep("c2", 0.5, 1),
                                        rep("c2#r2", 0.4, 2), rep("c2#r3", 0.3, 3)};
  CHECK(multi_round_reduction(mixed) == std::vector<double>{0.5, 1.0});

  CHECK(kind_of([] { multi_round_reduction({rep("c", 0.5, 1), rep("c#r3", 0.4, 3)}); }) == ErrorKind::ChainError);
  CHECK(kind_of([] { multi_round_reduction({rep("c#r2", 0.5, 2)}); }) == ErrorKind::ChainError);
  CHECK(kind_of([] { multi_round_reduction({rep("c", 0.5, 1), rep("c", 0.4, 1)}); }) == ErrorKind::ChainError);
  try {
    multi_round_reduction({rep("chain-7", 0.5, 1), rep("chain-7#r3", 0.4, 3)});
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("chain-7") != std::string::npos);
  }
}

TEST_CASE("calibrate_tau") {
  const std::vector<double> flat(7, 0.7);
  for (double p : {0.05, 0.5, 0.95}) CHECK(calibrate_tau(flat, p) == doctest::Approx(0.7).epsilon(1e-15));
  const std::vector<double> grid{0.75, 0.6, 0.7, 0.65};
  CHECK(calibrate_tau(grid, 0.25) == doctest::Approx(0.6375).epsilon(1e-12));
  CHECK(kind_of([] { calibrate_tau(std::vector<double>{}, 0.05); }) == ErrorKind::EmptyInput);
  CHECK(kind_of([] { calibrate_tau(std::vector<double>{0.5}, 1.0); }) == ErrorKind::InvalidArgument);
  CHECK(kTauLlama == 0.65);
  CHECK(kTauMixtral == 0.7);

  ContributionReport r;
  r.record_id = "x";
  r.cond_self_info = -10 * std::log(0.7);
  r.token_count = 10;
  CHECK(calibrate_tau(std::vector<ContributionReport>{r}) == doctest::Approx(0.7).epsilon(1e-12));
  r.cond_self_info.reset();
  CHECK(kind_of([&] { calibrate_tau(std::vector<ContributionReport>{r}); }) == ErrorKind::InvalidArgument);

  CHECK(percentile({1, 2, 3, 4, 5}, 0.0) == 1);
  CHECK(percentile({1, 2, 3, 4, 5}, 1.0) == 5);
  CHECK(percentile({1, 2, 3, 4, 5}, 0.1) == doctest::Approx(1.4));
}

}  // TEST_SUITE
