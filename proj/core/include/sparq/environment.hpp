#ifndef SPARQ_ENVIRONMENT_HPP
#define SPARQ_ENVIRONMENT_HPP

#include "sparq/kernel.hpp"
#include "sparq/rng.hpp"

#include <map>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace sparq {

enum class EnvironmentKind { SyntheticDrift, CsvSeries };

enum class CsvInterpolation { Nearest };

/// In-memory sensor series loaded from CSV: one value per (sensor, day).
struct CsvSeriesData {
    std::vector<std::string> sensor_ids;
    std::vector<Point> sensor_locations;          // (lon, lat)
    std::vector<std::map<long, double>> values;   // per sensor, keyed by day
    long first_day = 0;
    long last_day = 0;
    CsvInterpolation interpolation = CsvInterpolation::Nearest;
};

/// A time-varying reward environment. Immutable after construction.
struct EnvironmentSpec {
    EnvironmentKind kind = EnvironmentKind::SyntheticDrift;
    Vector lower;   // box bounds, one entry per dimension
    Vector upper;
    double sigma2 = 0.01;
    std::shared_ptr<const CsvSeriesData> csv;

    std::size_t dimension() const { return static_cast<std::size_t>(lower.size()); }
    void validate() const;
};

/// Noise-free reward f(x, t). The synthetic environment is the drifting-peak
/// closed form exp(-0.05 (x - 5 sin(0.1 t))^2) + 0.5 cos(0.2 x) + 1.5; the CSV
/// environment returns the stored value of the sensor nearest to x.
double true_value(const EnvironmentSpec& spec, const Point& x, long t);

/// true_value plus one Gaussian(0, sigma2) draw from the stream.
double sample(const EnvironmentSpec& spec, const Point& x, long t, RngStream& rng);

/// true_value plus one Gaussian(0, expert_variance) draw. Callers supply a
/// stream distinct from the sampling one.
double expert_query(const EnvironmentSpec& spec, const Point& x, long t,
                    double expert_variance, RngStream& rng);

/// Grid argmax of true_value at time t; ties break toward the lowest index.
std::pair<Point, double> instant_optimum(const EnvironmentSpec& spec, long t,
                                         std::span<const Point> grid);

EnvironmentSpec load_csv_environment(const std::string& path, CsvInterpolation interpolation);

/// Decision grid: a uniform inclusive linspace per dimension (tensor product,
/// guarded at 1e6 points) for the synthetic environment, the sensor set for
/// the CSV one.
std::vector<Point> make_grid(const EnvironmentSpec& spec, std::size_t resolution);

} // namespace sparq

#endif
