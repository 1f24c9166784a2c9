#include "sparq/environment.hpp"

#include "sparq/errors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace sparq {

void EnvironmentSpec::validate() const {
    if (lower.size() == 0 || lower.size() != upper.size())
        throw InputError("environment bounds must be a nonempty box");
    for (Eigen::Index i = 0; i < lower.size(); ++i)
        if (!(lower(i) <= upper(i)))
            throw InputError("environment bounds must satisfy lower <= upper");
    if (!(sigma2 > 0.0))
        throw InputError("environment sigma2 must be positive");
    if (kind == EnvironmentKind::SyntheticDrift && lower.size() != 1)
        throw InputError("the synthetic drift environment is one-dimensional");
    if (kind == EnvironmentKind::CsvSeries && !csv)
        throw InputError("csv environment missing its series data");
}

namespace {

void check_in_domain(const EnvironmentSpec& spec, const Point& x) {
    if (static_cast<std::size_t>(x.size()) != spec.dimension())
        throw InputError("point dimension does not match the environment domain");
}

double synthetic_value(double x, double t) {
    const double shift = x - 5.0 * std::sin(0.1 * t);
    return std::exp(-0.05 * shift * shift) + 0.5 * std::cos(0.2 * x) + 1.5;
}

std::size_t nearest_sensor(const CsvSeriesData& csv, const Point& x) {
    std::size_t best = 0;
    double best_dist = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < csv.sensor_locations.size(); ++i) {
        const double d = (csv.sensor_locations[i] - x).squaredNorm();
        if (d < best_dist) {
            best_dist = d;
            best = i;
        }
    }
    return best;
}

double csv_value(const CsvSeriesData& csv, const Point& x, long t) {
    const long day = csv.first_day + (t - 1);
    if (t < 1 || day < csv.first_day || day > csv.last_day)
        throw InputError("csv environment lookup outside the stored day range");
    const auto& series = csv.values[nearest_sensor(csv, x)];
    // nearest mode: missing days fall back to the nearest prior day
    auto it = series.upper_bound(day);
    if (it == series.begin())
        throw InputError("csv environment has no value at or before the requested day");
    --it;
    return it->second;
}

} // namespace

double true_value(const EnvironmentSpec& spec, const Point& x, long t) {
    check_in_domain(spec, x);
    switch (spec.kind) {
    case EnvironmentKind::SyntheticDrift:
        return synthetic_value(x(0), static_cast<double>(t));
    case EnvironmentKind::CsvSeries:
        return csv_value(*spec.csv, x, t);
    }
    throw InputError("unknown environment kind");
}

double sample(const EnvironmentSpec& spec, const Point& x, long t, RngStream& rng) {
    return true_value(spec, x, t) + std::sqrt(spec.sigma2) * rng.gaussian();
}

double expert_query(const EnvironmentSpec& spec, const Point& x, long t,
                    double expert_variance, RngStream& rng) {
    if (expert_variance < 0.0)
        throw InputError("expert variance must be nonnegative");
    return true_value(spec, x, t) + std::sqrt(expert_variance) * rng.gaussian();
}

std::pair<Point, double> instant_optimum(const EnvironmentSpec& spec, long t,
                                         std::span<const Point> grid) {
    if (grid.empty())
        throw InputError("instant_optimum needs a nonempty grid");
    std::size_t best = 0;
    double best_value = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double v = true_value(spec, grid[i], t);
        if (v > best_value) {
            best_value = v;
            best = i;
        }
    }
    return {grid[best], best_value};
}

namespace {

std::vector<std::string> split_csv_row(const std::string& row) {
    std::vector<std::string> cells;
    std::stringstream stream(row);
    std::string cell;
    while (std::getline(stream, cell, ','))
        cells.push_back(cell);
    if (!row.empty() && row.back() == ',')
        cells.emplace_back();
    return cells;
}

} // namespace

EnvironmentSpec load_csv_environment(const std::string& path, CsvInterpolation interpolation) {
    std::ifstream file(path);
    if (!file)
        throw IoError("cannot open csv environment file: " + path);

    std::string row;
    if (!std::getline(file, row))
        throw ParseError("csv environment file is empty", 1);
    if (!row.empty() && row.back() == '\r') row.pop_back();
    const std::vector<std::string> expected = {"location_id", "lon", "lat", "day", "value"};
    const std::vector<std::string> header = split_csv_row(row);
    if (header.size() != expected.size())
        throw ParseError("csv header must be location_id,lon,lat,day,value", 1);
    for (std::size_t i = 0; i < expected.size(); ++i)
        if (header[i] != expected[i])
            throw ParseError("unexpected csv header column '" + header[i] + "' (want '" +
                                 expected[i] + "')",
                             1);

    auto data = std::make_shared<CsvSeriesData>();
    data->interpolation = interpolation;
    std::map<std::string, std::size_t> sensor_index;
    data->first_day = std::numeric_limits<long>::max();
    data->last_day = std::numeric_limits<long>::min();

    std::size_t line = 1;
    while (std::getline(file, row)) {
        ++line;
        if (!row.empty() && row.back() == '\r') row.pop_back();
        if (row.empty()) continue;
        const std::vector<std::string> cells = split_csv_row(row);
        if (cells.size() != 5)
            throw ParseError("expected 5 comma-separated cells", line);
        double lon, lat, value;
        long day;
        try {
            lon = std::stod(cells[1]);
            lat = std::stod(cells[2]);
            day = std::stol(cells[3]);
            value = std::stod(cells[4]);
        } catch (const std::exception&) {
            throw ParseError("malformed numeric cell in csv row", line);
        }
        auto [it, inserted] = sensor_index.try_emplace(cells[0], data->sensor_ids.size());
        if (inserted) {
            data->sensor_ids.push_back(cells[0]);
            Point loc(2);
            loc << lon, lat;
            data->sensor_locations.push_back(loc);
            data->values.emplace_back();
        }
        data->values[it->second][day] = value;
        data->first_day = std::min(data->first_day, day);
        data->last_day = std::max(data->last_day, day);
    }
    if (data->sensor_ids.empty())
        throw ParseError("csv environment contains no data rows", line);

    EnvironmentSpec spec;
    spec.kind = EnvironmentKind::CsvSeries;
    spec.lower = Vector(2);
    spec.upper = Vector(2);
    spec.lower << std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity();
    spec.upper << -std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity();
    for (const Point& loc : data->sensor_locations) {
        spec.lower = spec.lower.cwiseMin(loc);
        spec.upper = spec.upper.cwiseMax(loc);
    }
    spec.csv = std::move(data);
    return spec;
}

std::vector<Point> make_grid(const EnvironmentSpec& spec, std::size_t resolution) {
    spec.validate();
    if (spec.kind == EnvironmentKind::CsvSeries)
        return spec.csv->sensor_locations;
    if (resolution < 2)
        throw InputError("grid resolution must be at least 2");
    const auto d = spec.dimension();
    double total = 1.0;
    for (std::size_t i = 0; i < d; ++i) total *= static_cast<double>(resolution);
    if (total > 1e6)
        throw InputError("grid would exceed the 1e6 point guard");

    std::vector<Point> grid;
    grid.reserve(static_cast<std::size_t>(total));
    std::vector<std::size_t> idx(d, 0);
    while (true) {
        Point p(static_cast<Eigen::Index>(d));
        for (std::size_t i = 0; i < d; ++i) {
            const double alpha = static_cast<double>(idx[i]) / static_cast<double>(resolution - 1);
            p(static_cast<Eigen::Index>(i)) = spec.lower(static_cast<Eigen::Index>(i)) +
                                              alpha * (spec.upper(static_cast<Eigen::Index>(i)) -
                                                       spec.lower(static_cast<Eigen::Index>(i)));
        }
        grid.push_back(std::move(p));
        std::size_t k = d;
        while (k > 0) {
            if (++idx[k - 1] < resolution) break;
            idx[k - 1] = 0;
            --k;
        }
        if (k == 0) break;
    }
    return grid;
}

} // namespace sparq
