// Copyright 2026 the fwgan authors.
// SPDX-License-Identifier: Apache-2.0
//
// Synthetic samplers against their analytic moments, CSV ingestion with
// line-numbered diagnostics, bit-faithful round trips, and the standardized
// train/validation split.

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "fwgan/datasets.hpp"
#include "fwgan/errors.hpp"
#include "fwgan/rng.hpp"
#include "testutil.hpp"

using Catch::Approx;
using namespace fwgan;
using testutil::max_abs_diff;

namespace {

struct ColumnStats {
    double mean;
    double var;
};

ColumnStats stats(const Tensor& t, int col) {
    double m = 0.0;
    for (int i = 0; i < t.rows(); ++i) m += t(i, col);
    m /= t.rows();
    double v = 0.0;
    for (int i = 0; i < t.rows(); ++i) v += (t(i, col) - m) * (t(i, col) - m);
    v /= t.rows() - 1;
    return {m, v};
}

const std::string kTmp = "dataset_test_tmp";

std::string tmp_path(const std::string& name) {
    std::filesystem::create_directories(kTmp);
    return kTmp + "/" + name;
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
}

}  // namespace

TEST_CASE("synthetic samplers match their analytic moments") {
    const int n = 100000;
    auto draw = [&](SyntheticName name) {
        RngStream rng = RngStream::from_seed_and_salt(1234, salt::kData);
        return sample_synthetic(name, n, rng);
    };

    SECTION("mixture of gaussians") {
        const Tensor x = draw(SyntheticName::MoG);
        for (int c = 0; c < 2; ++c) {
            const ColumnStats s = stats(x, c);
            REQUIRE(std::abs(s.mean) < 0.02);
            REQUIRE(s.var == Approx(2.04).margin(0.06));
        }
    }
    SECTION("banana") {
        const Tensor x = draw(SyntheticName::Banana);
        const ColumnStats s0 = stats(x, 0);
        const ColumnStats s1 = stats(x, 1);
        REQUIRE(std::abs(s0.mean) < 0.015);
        REQUIRE(s0.var == Approx(1.0).margin(0.03));
        REQUIRE(s1.mean == Approx(-0.5).margin(0.02));
        REQUIRE(s1.var == Approx(1.5).margin(0.06));
    }
    SECTION("rings") {
        const Tensor x = draw(SyntheticName::Rings);
        for (int c = 0; c < 2; ++c) {
            const ColumnStats s = stats(x, c);
            REQUIRE(std::abs(s.mean) < 0.02);
            REQUIRE(s.var == Approx(1.25125).margin(0.04));
        }
        // Radii concentrate near 1 and 2 (radial noise sigma 0.05; a 7-sigma
        // window keeps the expected outlier count at ~3e-7 over 1e5 draws).
        int near = 0;
        for (int i = 0; i < n; ++i) {
            const double r = std::hypot(x(i, 0), x(i, 1));
            if (std::abs(r - 1.0) < 0.35 || std::abs(r - 2.0) < 0.35) ++near;
        }
        REQUIRE(near == n);
    }
    SECTION("square boundary") {
        const Tensor x = draw(SyntheticName::Square);
        for (int c = 0; c < 2; ++c) {
            const ColumnStats s = stats(x, c);
            REQUIRE(std::abs(s.mean) < 0.025);
            REQUIRE(s.var == Approx(8.0 / 3.0 + 0.0025).margin(0.05));
        }
        // Every point lies within noise distance of the boundary.
        int off_boundary = 0;
        for (int i = 0; i < n; ++i) {
            const double d = std::max(std::abs(x(i, 0)), std::abs(x(i, 1)));
            if (std::abs(d - 2.0) > 0.3) ++off_boundary;
        }
        REQUIRE(off_boundary == 0);
    }
    SECTION("cosine") {
        const Tensor x = draw(SyntheticName::Cosine);
        const ColumnStats s0 = stats(x, 0);
        const ColumnStats s1 = stats(x, 1);
        REQUIRE(std::abs(s0.mean) < 0.03);
        REQUIRE(s0.var == Approx(16.0 / 3.0).margin(0.1));
        REQUIRE(s1.mean == Approx(std::sin(8.0) / 4.0).margin(0.02));
    }
    SECTION("funnel") {
        const Tensor x = draw(SyntheticName::Funnel);
        const ColumnStats s0 = stats(x, 0);
        const ColumnStats s1 = stats(x, 1);
        REQUIRE(std::abs(s0.mean) < 0.015);
        REQUIRE(s0.var == Approx(1.0).margin(0.03));
        REQUIRE(std::abs(s1.mean) < 0.03);
        REQUIRE(s1.var == Approx(std::exp(0.5)).margin(0.08));
    }
}

TEST_CASE("synthetic draws are deterministic in (name, n, seed)") {
    const SyntheticSpec spec{SyntheticName::Banana, 64, 99};
    const Tensor a = sample_synthetic(spec);
    const Tensor b = sample_synthetic(spec);
    REQUIRE(std::memcmp(a.data(), b.data(), sizeof(double) * a.size()) == 0);

    const Tensor c = sample_synthetic(SyntheticSpec{SyntheticName::Banana, 64, 100});
    REQUIRE(max_abs_diff(a, c) > 0.0);
}

TEST_CASE("synthetic name parsing") {
    REQUIRE(synthetic_from_string("mog") == SyntheticName::MoG);
    REQUIRE(synthetic_from_string("MoG") == SyntheticName::MoG);
    REQUIRE(synthetic_from_string("FUNNEL") == SyntheticName::Funnel);
    REQUIRE(to_string(SyntheticName::Rings) == "rings");
    REQUIRE_THROWS_AS(synthetic_from_string("spiral"), config_error);
    REQUIRE_THROWS_WITH(synthetic_from_string("spiral"),
                        Catch::Matchers::ContainsSubstring("spiral"));
}

TEST_CASE("csv loading") {
    SECTION("plain numeric file") {
        const std::string p = tmp_path("plain.csv");
        write_file(p, "1.5,2\n-3,4e-1\n");
        const Tensor t = load_csv(p);
        REQUIRE(t.rows() == 2);
        REQUIRE(t.cols() == 2);
        REQUIRE(t(0, 0) == 1.5);
        REQUIRE(t(1, 1) == 0.4);
    }
    SECTION("header row is skipped when requested") {
        const std::string p = tmp_path("header.csv");
        write_file(p, "x1,x2\n1,2\n");
        const Tensor t = load_csv(p, CsvOptions{true, ','});
        REQUIRE(t.rows() == 1);
        REQUIRE(t(0, 1) == 2.0);
        REQUIRE_THROWS_AS(load_csv(p), config_error);  // header parsed as data
    }
    SECTION("windows line endings are tolerated") {
        const std::string p = tmp_path("crlf.csv");
        write_file(p, "1,2\r\n3,4\r\n");
        const Tensor t = load_csv(p);
        REQUIRE(t(1, 1) == 4.0);
    }
    SECTION("alternative delimiter") {
        const std::string p = tmp_path("semi.csv");
        write_file(p, "1;2\n3;4\n");
        const Tensor t = load_csv(p, CsvOptions{false, ';'});
        REQUIRE(t(1, 0) == 3.0);
    }
    SECTION("ragged rows are reported with their line number") {
        const std::string p = tmp_path("ragged.csv");
        write_file(p, "1,2\n3,4\n5\n");
        REQUIRE_THROWS_WITH(load_csv(p), Catch::Matchers::ContainsSubstring("line 3"));
    }
    SECTION("non-numeric cells are reported with their line number") {
        const std::string p = tmp_path("alpha.csv");
        write_file(p, "1,2\nx,4\n");
        REQUIRE_THROWS_WITH(load_csv(p), Catch::Matchers::ContainsSubstring("line 2"));
    }
    SECTION("missing and empty files") {
        REQUIRE_THROWS_AS(load_csv(tmp_path("nope.csv")), config_error);
        const std::string p = tmp_path("empty.csv");
        write_file(p, "");
        REQUIRE_THROWS_AS(load_csv(p), config_error);
    }
}

TEST_CASE("csv round trip is bit-faithful") {
    RngStream rng = RngStream::from_seed_and_salt(21, 0);
    Tensor t = rng.normal_tensor(17, 3);
    t(0, 0) = 1.0 / 3.0;
    t(1, 1) = 1e-300;
    t(2, 2) = -1234567.89012345678;
    const std::string p = tmp_path("roundtrip.csv");
    write_csv(p, t);
    const Tensor back = load_csv(p);
    REQUIRE(back.same_shape(t));
    REQUIRE(std::memcmp(back.data(), t.data(), sizeof(double) * t.size()) == 0);

    write_csv(p, t, {"a", "b", "c"});
    const Tensor back2 = load_csv(p, CsvOptions{true, ','});
    REQUIRE(std::memcmp(back2.data(), t.data(), sizeof(double) * t.size()) == 0);
    REQUIRE_THROWS_AS(write_csv(p, t, {"a", "b"}), std::invalid_argument);
}

TEST_CASE("standardize_split") {
    RngStream rng = RngStream::from_seed_and_salt(33, 0);
    Tensor data = rng.normal_tensor(50, 2);
    for (int i = 0; i < 50; ++i) {
        data(i, 0) = 5.0 + 3.0 * data(i, 0);   // mean 5, sd 3
        data(i, 1) = -2.0 + 0.5 * data(i, 1);  // mean -2, sd 0.5
    }

    const TabularDataset ds = standardize_split(data, 0.2, 7);
    REQUIRE(ds.valid.rows() == 10);
    REQUIRE(ds.train.rows() == 40);

    SECTION("train statistics are exactly normalized") {
        for (int c = 0; c < 2; ++c) {
            const ColumnStats s = stats(ds.train, c);
            REQUIRE(std::abs(s.mean) < 1e-12);
            // stats() uses n-1; the split normalizes by n.
            const double pop_var = s.var * 39.0 / 40.0;
            REQUIRE(pop_var == Approx(1.0).margin(1e-12));
        }
        REQUIRE(ds.means[0] == Approx(5.0).margin(2.0));
        REQUIRE(ds.stds[0] > 1.0);
    }

    SECTION("indices are disjoint and cover the input") {
        std::set<int> seen(ds.train_idx.begin(), ds.train_idx.end());
        for (int i : ds.valid_idx) REQUIRE(seen.insert(i).second);
        REQUIRE(seen.size() == 50);
    }

    SECTION("validation uses training statistics") {
        const int vi = ds.valid_idx[0];
        REQUIRE(ds.valid(0, 0) ==
                Approx((data(vi, 0) - ds.means[0]) / ds.stds[0]).margin(1e-12));
    }

    SECTION("deterministic in the seed") {
        const TabularDataset again = standardize_split(data, 0.2, 7);
        REQUIRE(max_abs_diff(again.train, ds.train) == 0.0);
        const TabularDataset other = standardize_split(data, 0.2, 8);
        REQUIRE(other.train_idx != ds.train_idx);
    }

    SECTION("constant columns are floored, not divided by zero") {
        Tensor flat(10, 1);
        for (int i = 0; i < 10; ++i) flat(i, 0) = 42.0;
        const TabularDataset f = standardize_split(flat, 0.2, 1);
        REQUIRE(f.train.all_finite());
        REQUIRE(f.stds[0] == 1e-8);
    }

    SECTION("argument validation") {
        REQUIRE_THROWS_AS(standardize_split(data, 0.0, 1), std::invalid_argument);
        REQUIRE_THROWS_AS(standardize_split(data, 1.0, 1), std::invalid_argument);
        REQUIRE_THROWS_AS(standardize_split(Tensor(1, 2), 0.5, 1), std::invalid_argument);
    }
}
