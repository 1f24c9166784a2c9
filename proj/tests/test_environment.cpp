#include "sparq/environment.hpp"

#include "sparq/errors.hpp"

#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <unistd.h>

using namespace sparq;

namespace {

Point pt(double x) { return Point::Constant(1, x); }

EnvironmentSpec synthetic(double sigma2 = 0.01) {
    EnvironmentSpec env;
    env.kind = EnvironmentKind::SyntheticDrift;
    env.lower = Vector::Constant(1, -50.0);
    env.upper = Vector::Constant(1, 50.0);
    env.sigma2 = sigma2;
    return env;
}

struct TempFile {
    std::filesystem::path path;
    explicit TempFile(const std::string& contents) {
        path = std::filesystem::temp_directory_path() /
               ("sparq_env_test_" + std::to_string(::getpid()) + "_" +
                std::to_string(counter()++) + ".csv");
        std::ofstream out(path);
        out << contents;
    }
    ~TempFile() { std::filesystem::remove(path); }
    static int& counter() {
        static int value = 0;
        return value;
    }
};

} // namespace

TEST_SUITE_BEGIN("environment");

TEST_CASE("synthetic closed form plug-in values") {
    const EnvironmentSpec env = synthetic();
    CHECK(true_value(env, pt(0.0), 0) == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(true_value(env, pt(std::numbers::pi / 0.2), 0) == doctest::Approx(1.0).epsilon(1e-5));
    CHECK_THROWS_AS(true_value(env, Point::Zero(2), 0), InputError);
}

TEST_CASE("synthetic rewards stay within their analytical range") {
    const EnvironmentSpec env = synthetic();
    for (long t : {0L, 3L, 17L, 100L}) {
        for (int i = 0; i <= 2000; ++i) {
            const double x = -50.0 + 100.0 * i / 2000.0;
            const double v = true_value(env, pt(x), t);
            CHECK(v >= 0.5 - 1e-9);
            CHECK(v <= 3.0 + 1e-9);
        }
    }
}

TEST_CASE("per-step drift stays below one") {
    const EnvironmentSpec env = synthetic();
    double worst = 0.0;
    for (int i = 0; i < 1001; ++i) {
        const double x = -50.0 + 100.0 * i / 1000.0;
        for (long t = 0; t < 200; ++t) {
            const double diff =
                std::abs(true_value(env, pt(x), t + 1) - true_value(env, pt(x), t));
            worst = std::max(worst, diff);
        }
    }
    CHECK(worst <= 1.0);
}

TEST_CASE("sampling noise has the configured mean and variance") {
    const EnvironmentSpec env = synthetic(0.01);
    RngStream rng(77, 0);
    const Point x = pt(3.0);
    const long t = 12;
    const double truth = true_value(env, x, t);
    const int n = 100000;
    double sum = 0.0, sumsq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double y = sample(env, x, t, rng);
        sum += y - truth;
        sumsq += (y - truth) * (y - truth);
    }
    const double mean = sum / n;
    const double variance = sumsq / n - mean * mean;
    CHECK(std::abs(mean) <= 4.0 * 0.1 / std::sqrt(static_cast<double>(n)));
    CHECK(variance == doctest::Approx(0.01).epsilon(0.05));
    CHECK(rng.draws() == static_cast<std::uint64_t>(n));
}

TEST_CASE("expert queries are exact at zero variance and account their draws") {
    const EnvironmentSpec env = synthetic();
    RngStream rng(5, 1);
    const double truth = true_value(env, pt(-4.0), 9);
    CHECK(expert_query(env, pt(-4.0), 9, 0.0, rng) == doctest::Approx(truth).epsilon(1e-15));

    const std::uint64_t before = rng.draws();
    for (int q = 0; q < 17; ++q) expert_query(env, pt(1.0), 3, 0.01, rng);
    CHECK(rng.draws() - before == 17);

    // matching variances make expert queries distributionally identical to samples
    RngStream a(21, 0), b(21, 0);
    CHECK(sample(env, pt(2.0), 4, a) == expert_query(env, pt(2.0), 4, env.sigma2, b));
}

TEST_CASE("instant optimum is the grid argmax") {
    const EnvironmentSpec env = synthetic();
    std::vector<Point> grid;
    for (int i = 0; i <= 1000; ++i) grid.push_back(pt(-50.0 + 100.0 * i / 1000.0));

    const auto [xstar, fstar] = instant_optimum(env, 0, grid);
    CHECK(xstar(0) == doctest::Approx(0.0));
    CHECK(fstar == doctest::Approx(3.0).epsilon(1e-12));
    for (const Point& x : grid) CHECK(fstar >= true_value(env, x, 0));

    const std::vector<Point> one = {pt(7.0)};
    CHECK(instant_optimum(env, 5, one).first == pt(7.0));
    CHECK_THROWS_AS(instant_optimum(env, 5, std::vector<Point>{}), InputError);
}

TEST_CASE("grids are inclusive linspaces with a size guard") {
    const EnvironmentSpec env = synthetic();
    const std::vector<Point> grid = make_grid(env, 11);
    REQUIRE(grid.size() == 11);
    CHECK(grid.front()(0) == doctest::Approx(-50.0));
    CHECK(grid.back()(0) == doctest::Approx(50.0));
    CHECK(grid[5](0) == doctest::Approx(0.0));
    CHECK_THROWS_AS(make_grid(env, 1), InputError);
}

TEST_CASE("csv environment loads sensors and fills missing days") {
    const TempFile file("location_id,lon,lat,day,value\n"
                        "a,0.0,0.0,1,1.5\n"
                        "a,0.0,0.0,2,1.7\n"
                        "a,0.0,0.0,3,1.9\n"
                        "b,1.0,1.0,1,2.5\n"
                        "b,1.0,1.0,2,2.6\n"
                        "b,1.0,1.0,3,2.8\n");
    const EnvironmentSpec env = load_csv_environment(file.path.string(), CsvInterpolation::Nearest);
    CHECK(env.csv->sensor_ids.size() == 2);
    CHECK(env.lower(0) == doctest::Approx(0.0));
    CHECK(env.upper(1) == doctest::Approx(1.0));

    const std::vector<Point> grid = make_grid(env, 100);
    REQUIRE(grid.size() == 2);   // csv grids are the sensor set

    Point near_b(2);
    near_b << 0.9, 0.95;
    CHECK(true_value(env, near_b, 2) == doctest::Approx(2.6));
    CHECK(instant_optimum(env, 1, grid).second == doctest::Approx(2.5));
    CHECK_THROWS_AS(true_value(env, near_b, 0), InputError);    // before the first day
    CHECK_THROWS_AS(true_value(env, near_b, 4), InputError);    // past the last day
}

TEST_CASE("csv missing day falls back to the nearest prior day") {
    const TempFile file("location_id,lon,lat,day,value\n"
                        "a,0.0,0.0,1,1.5\n"
                        "a,0.0,0.0,3,1.9\n"
                        "b,1.0,1.0,1,2.5\n"
                        "b,1.0,1.0,2,2.6\n"
                        "b,1.0,1.0,3,2.8\n");
    const EnvironmentSpec env = load_csv_environment(file.path.string(), CsvInterpolation::Nearest);
    CHECK(true_value(env, pt(0.0).replicate(2, 1), 2) == doctest::Approx(1.5));
}

TEST_CASE("csv parse failures carry position information") {
    const TempFile bad_header("location_id,lon,latitude,day,value\n");
    try {
        load_csv_environment(bad_header.path.string(), CsvInterpolation::Nearest);
        FAIL("expected ParseError");
    } catch (const ParseError& err) {
        CHECK(std::string(err.what()).find("latitude") != std::string::npos);
    }

    const TempFile bad_row("location_id,lon,lat,day,value\n"
                           "a,0.0,0.0,1,1.5\n"
                           "a,0.0,zero,2,1.7\n");
    try {
        load_csv_environment(bad_row.path.string(), CsvInterpolation::Nearest);
        FAIL("expected ParseError");
    } catch (const ParseError& err) {
        CHECK(err.line_number == 3);
    }

    CHECK_THROWS_AS(load_csv_environment("/nonexistent/nowhere.csv", CsvInterpolation::Nearest),
                    IoError);
}

TEST_SUITE_END();
