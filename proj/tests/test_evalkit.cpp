// Copyright 2026 the fwgan authors.
// SPDX-License-Identifier: Apache-2.0
//
// Evaluation metrics: Gaussian-kernel MMD and KDE negative log-likelihood
// against naive double-loop oracles, density-ratio fields, grids, and the
// metrics CSV log.

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <vector>

#include "fwgan/errors.hpp"
#include "fwgan/metrics.hpp"
#include "fwgan/rng.hpp"
#include "fwgan/tensor.hpp"
#include "testutil.hpp"

using Catch::Approx;
using namespace fwgan;
using testutil::max_abs_diff;

namespace {

double mmd2_naive(const Tensor& x, const Tensor& y, double h) {
    auto k = [&](const Tensor& a, int i, const Tensor& b, int j) {
        double d2 = 0.0;
        for (int c = 0; c < a.cols(); ++c) {
            const double diff = a(i, c) - b(j, c);
            d2 += diff * diff;
        }
        return std::exp(-d2 / (2.0 * h * h));
    };
    double kxx = 0.0, kyy = 0.0, kxy = 0.0;
    for (int i = 0; i < x.rows(); ++i)
        for (int j = 0; j < x.rows(); ++j) kxx += k(x, i, x, j);
    for (int i = 0; i < y.rows(); ++i)
        for (int j = 0; j < y.rows(); ++j) kyy += k(y, i, y, j);
    for (int i = 0; i < x.rows(); ++i)
        for (int j = 0; j < y.rows(); ++j) kxy += k(x, i, y, j);
    const double nx = x.rows(), ny = y.rows();
    return kxx / (nx * nx) + kyy / (ny * ny) - 2.0 * kxy / (nx * ny);
}

double kde_nll_naive(const Tensor& gen, const Tensor& val, double h) {
    const double d = val.cols();
    const double norm = std::pow(2.0 * std::numbers::pi * h * h, d / 2.0);
    double acc = 0.0;
    for (int j = 0; j < val.rows(); ++j) {
        double p = 0.0;
        for (int i = 0; i < gen.rows(); ++i) {
            double d2 = 0.0;
            for (int c = 0; c < val.cols(); ++c) {
                const double diff = val(j, c) - gen(i, c);
                d2 += diff * diff;
            }
            p += std::exp(-d2 / (2.0 * h * h));
        }
        acc += std::log(p / (gen.rows() * norm));
    }
    return -acc / val.rows();
}

}  // namespace

TEST_CASE("mmd basic properties") {
    RngStream rng = RngStream::from_seed_and_salt(51, 0);
    SECTION("identical samples have zero mmd") {
        const Tensor x = rng.normal_tensor(40, 2);
        REQUIRE(std::abs(mmd2_gaussian(x, x, 0.5)) <= 1e-12);
    }
    SECTION("two-point hand value") {
        const Tensor x = Tensor::from_rows({{0.0, 0.0}});
        const Tensor y = Tensor::from_rows({{1.0, 0.0}});
        REQUIRE(mmd2_gaussian(x, y, 1.0) ==
                Approx(2.0 - 2.0 * std::exp(-0.5)).margin(1e-14));
    }
    SECTION("symmetry and nonnegativity") {
        const Tensor x = rng.normal_tensor(15, 2);
        Tensor y = rng.normal_tensor(25, 2);
        for (std::int64_t k = 0; k < y.size(); ++k) y[k] += 0.5;
        const double ab = mmd2_gaussian(x, y, 0.7);
        const double ba = mmd2_gaussian(y, x, 0.7);
        REQUIRE(ab == Approx(ba).margin(1e-14));
        REQUIRE(ab >= 0.0);
        REQUIRE(ab > 1e-4);  // shifted distributions are detectably different
    }
    SECTION("errors") {
        REQUIRE_THROWS_AS(mmd2_gaussian(Tensor(0, 2), Tensor(3, 2), 1.0),
                          std::invalid_argument);
        REQUIRE_THROWS_AS(mmd2_gaussian(Tensor(3, 2), Tensor(3, 3), 1.0),
                          std::invalid_argument);
        REQUIRE_THROWS_AS(mmd2_gaussian(Tensor(3, 2), Tensor(3, 2), 0.0),
                          std::invalid_argument);
    }
}

TEST_CASE("mmd matches the naive oracle") {
    RngStream rng = RngStream::from_seed_and_salt(52, 0);
    for (int rep = 0; rep < 100; ++rep) {
        const int nx = rng.uniform_int(12) + 2;
        const int ny = rng.uniform_int(12) + 2;
        const int d = rng.uniform_int(3) + 1;
        const Tensor x = rng.normal_tensor(nx, d);
        const Tensor y = rng.normal_tensor(ny, d);
        const double h = rng.uniform(0.3, 2.0);
        REQUIRE(std::abs(mmd2_gaussian(x, y, h) - mmd2_naive(x, y, h)) < 1e-10);
    }
}

TEST_CASE("mmd blocked path agrees with the oracle beyond one block") {
    RngStream rng = RngStream::from_seed_and_salt(53, 0);
    const Tensor x = rng.normal_tensor(detail::kPairBlock + 37, 2);
    const Tensor y = rng.normal_tensor(detail::kPairBlock + 11, 2);
    REQUIRE(std::abs(mmd2_gaussian(x, y, 1.0) - mmd2_naive(x, y, 1.0)) < 1e-9);
}

TEST_CASE("kde log density") {
    SECTION("single sample at the query point in 2-D") {
        const Tensor s = Tensor::from_rows({{0.3, -0.7}});
        const Tensor lp = kde_log_density(s, s, 1.0);
        REQUIRE(lp(0, 0) == Approx(-std::log(2.0 * std::numbers::pi)).margin(1e-12));
    }
    SECTION("doubling the bandwidth subtracts d log 2 at the mode") {
        const Tensor s = Tensor::from_rows({{0.0, 0.0}});
        const double lp1 = kde_log_density(s, s, 0.5)(0, 0);
        const double lp2 = kde_log_density(s, s, 1.0)(0, 0);
        REQUIRE(lp1 - lp2 == Approx(2.0 * std::log(2.0)).margin(1e-12));
    }
    SECTION("far points stay finite through the log-sum-exp") {
        const Tensor far = Tensor::from_rows({{1000.0, 1000.0}});
        const Tensor s = Tensor::from_rows({{0.0, 0.0}, {0.1, 0.0}});
        const Tensor lp = kde_log_density(far, s, 0.25);
        REQUIRE(std::isfinite(lp(0, 0)));
        REQUIRE(lp(0, 0) < -1e6);
    }
    SECTION("errors") {
        REQUIRE_THROWS_AS(kde_log_density(Tensor(2, 2), Tensor(0, 2), 1.0),
                          std::invalid_argument);
        REQUIRE_THROWS_AS(kde_log_density(Tensor(2, 2), Tensor(2, 3), 1.0),
                          std::invalid_argument);
        REQUIRE_THROWS_AS(kde_log_density(Tensor(2, 2), Tensor(2, 2), -1.0),
                          std::invalid_argument);
    }
}

TEST_CASE("kde nll matches the naive oracle") {
    RngStream rng = RngStream::from_seed_and_salt(54, 0);
    for (int rep = 0; rep < 100; ++rep) {
        const int ng = rng.uniform_int(12) + 2;
        const int nv = rng.uniform_int(8) + 2;
        const int d = rng.uniform_int(3) + 1;
        const Tensor gen = rng.normal_tensor(ng, d);
        const Tensor val = rng.normal_tensor(nv, d);
        const double h = rng.uniform(0.3, 1.5);
        REQUIRE(std::abs(kde_nll(gen, val, h) - kde_nll_naive(gen, val, h)) < 1e-8);
    }
}

TEST_CASE("ratio field") {
    RngStream rng = RngStream::from_seed_and_salt(55, 0);
    SECTION("constant critics give exactly unit ratios") {
        auto critic = [](const Tensor& pts) { return Tensor(pts.rows(), 1); };
        const Tensor ref = rng.normal_tensor(100, 2);
        const Tensor pts = rng.normal_tensor(7, 2);
        const Tensor r = ratio_field(critic, pts, ref, 1.0);
        for (std::int64_t k = 0; k < r.size(); ++k) REQUIRE(r[k] == 1.0);
    }
    SECTION("invariant to constant critic shifts") {
        const Tensor ref = rng.normal_tensor(200, 2);
        const Tensor pts = rng.normal_tensor(9, 2);
        auto critic_a = [](const Tensor& p) {
            Tensor t(p.rows(), 1);
            for (int i = 0; i < p.rows(); ++i) t(i, 0) = 0.3 * p(i, 0) - 0.1 * p(i, 1);
            return t;
        };
        auto critic_b = [&](const Tensor& p) {
            Tensor t = critic_a(p);
            for (std::int64_t k = 0; k < t.size(); ++k) t[k] += 123.0;
            return t;
        };
        REQUIRE(max_abs_diff(ratio_field(critic_a, pts, ref, 1.0),
                             ratio_field(critic_b, pts, ref, 1.0)) < 1e-9);
    }
    SECTION("self-normalization: mean ratio over fresh Q draws is near 1") {
        auto critic = [](const Tensor& p) {
            Tensor t(p.rows(), 1);
            for (int i = 0; i < p.rows(); ++i) t(i, 0) = 0.5 * p(i, 0);
            return t;
        };
        const Tensor ref = rng.normal_tensor(5000, 2);
        const Tensor fresh = rng.normal_tensor(5000, 2);
        const Tensor r = ratio_field(critic, fresh, ref, 1.0);
        REQUIRE(r.mean() == Approx(1.0).margin(0.05));
        REQUIRE(r.min() >= 0.0);
    }
    SECTION("temperature rescales the critic before the softmax") {
        const Tensor ref = rng.normal_tensor(50, 1);
        const Tensor pts = rng.normal_tensor(5, 1);
        auto critic = [](const Tensor& p) {
            Tensor t(p.rows(), 1);
            for (int i = 0; i < p.rows(); ++i) t(i, 0) = 2.0 * p(i, 0);
            return t;
        };
        auto half_critic = [](const Tensor& p) {
            Tensor t(p.rows(), 1);
            for (int i = 0; i < p.rows(); ++i) t(i, 0) = p(i, 0);
            return t;
        };
        REQUIRE(max_abs_diff(ratio_field(critic, pts, ref, 2.0),
                             ratio_field(half_critic, pts, ref, 1.0)) < 1e-12);
    }
    SECTION("critic output shape is validated") {
        auto bad = [](const Tensor& p) { return Tensor(p.rows(), 2); };
        REQUIRE_THROWS_AS(ratio_field(bad, Tensor(3, 2), Tensor(4, 2), 1.0),
                          std::invalid_argument);
    }
}

TEST_CASE("grid construction") {
    const Grid2D g = make_grid(0.0, 1.0, 10.0, 12.0, 2, 3);
    REQUIRE(g.points.rows() == 6);
    REQUIRE(g.dx == Approx(1.0));
    REQUIRE(g.dy == Approx(1.0));
    REQUIRE(g.cell_area == Approx(1.0));
    // y slowest: (0,10),(1,10),(0,11),(1,11),(0,12),(1,12)
    REQUIRE(g.points(0, 0) == 0.0);
    REQUIRE(g.points(0, 1) == 10.0);
    REQUIRE(g.points(1, 0) == 1.0);
    REQUIRE(g.points(1, 1) == 10.0);
    REQUIRE(g.points(2, 0) == 0.0);
    REQUIRE(g.points(2, 1) == 11.0);
    REQUIRE(g.points(5, 0) == 1.0);
    REQUIRE(g.points(5, 1) == 12.0);

    const Grid2D single = make_grid(0.5, 0.5, 1.0, 1.0, 1, 1);
    REQUIRE(single.points.rows() == 1);
    REQUIRE(single.dx == 0.0);
    REQUIRE_THROWS_AS(make_grid(0, 1, 0, 1, 0, 2), std::invalid_argument);
    REQUIRE_THROWS_AS(make_grid(1, 0, 0, 1, 2, 2), std::invalid_argument);
}

TEST_CASE("median pairwise distance") {
    const Tensor x = Tensor::from_rows({{0.0}, {1.0}, {3.0}});
    REQUIRE(median_pairwise_distance(x) == Approx(2.0));
    // Truncation to max_points keeps the leading rows only.
    const Tensor y = Tensor::from_rows({{0.0}, {1.0}, {3.0}, {100.0}});
    REQUIRE(median_pairwise_distance(y, 3) == Approx(2.0));
    REQUIRE_THROWS_AS(median_pairwise_distance(Tensor(1, 2)), std::invalid_argument);
}

TEST_CASE("metric records round-trip through csv") {
    std::filesystem::create_directories("evalkit_test_tmp");
    const std::string path = "evalkit_test_tmp/metrics.csv";
    std::vector<MetricRecord> log(3);
    log[0].epoch = 1;
    log[0].divergence = 0.25;
    log[1].epoch = 2;
    log[1].divergence = -0.125;
    log[1].nll = 3.5;
    log[1].mmd_x1e3 = 0.875;
    log[2].epoch = 3;
    log[2].divergence = 1.0 / 3.0;

    write_metrics_csv(path, log);
    const std::vector<MetricRecord> back = read_metrics_csv(path);
    REQUIRE(back.size() == 3);
    REQUIRE(back[0].epoch == 1);
    REQUIRE(back[0].divergence == 0.25);
    REQUIRE(std::isnan(back[0].nll));
    REQUIRE(back[1].nll == 3.5);
    REQUIRE(back[1].mmd_x1e3 == 0.875);
    REQUIRE(back[2].divergence == 1.0 / 3.0);  // 17 significant digits

    const std::string text = metrics_csv_string(log);
    REQUIRE(text.rfind("epoch,divergence,nll,mmd_x1e3\n", 0) == 0);
}

TEST_CASE("negative estimate counting") {
    std::vector<MetricRecord> a(4);
    a[0].divergence = 0.5;
    a[1].divergence = -0.1;
    a[2].divergence = -1e-9;
    // a[3] stays NaN: not counted either way.
    REQUIRE(negative_estimate_count(a) == 2);

    std::vector<MetricRecord> b(2);
    b[0].divergence = -3.0;
    b[1].divergence = 0.0;  // zero is not negative
    REQUIRE(negative_estimate_count(b) == 1);

    std::vector<MetricRecord> both = a;
    both.insert(both.end(), b.begin(), b.end());
    REQUIRE(negative_estimate_count(both) ==
            negative_estimate_count(a) + negative_estimate_count(b));
    REQUIRE(negative_estimate_count({}) == 0);
}

TEST_CASE("metrics csv rejects malformed input") {
    std::filesystem::create_directories("evalkit_test_tmp");
    const std::string path = "evalkit_test_tmp/bad.csv";
    {
        std::ofstream out(path);
        out << "wrong,header,row,here\n1,2,3,4\n";
    }
    REQUIRE_THROWS_AS(read_metrics_csv(path), config_error);
    REQUIRE_THROWS_AS(read_metrics_csv("evalkit_test_tmp/missing.csv"), config_error);
}
