#pragma once

#include "stefan/forward.hpp"
#include "stefan/inverse.hpp"

#include <json.hpp>

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace stefan::io {

namespace fs = std::filesystem;
using Json = nlohmann::json;

enum class Mode { Forward, Invert, Perturb, Roundtrip };

struct InitialShape {
    enum class Kind { Circle, Random, Coefficients } kind = Kind::Random;
    double radius = 1.0;
    double amplitude = 0.1;
    std::uint64_t seed = 1;
    std::vector<double> coeffs;
};

struct ScheduleSpec {
    std::string preset;  // "quadratic", "cosine" or empty for tabulated
    std::vector<std::pair<double, double>> samples;

    double evaluate(double t) const;
};

struct InitialFieldSpec {
    std::optional<double> constant;
    std::vector<std::pair<double, double>> radial;

    forward::InitialField build(double um0) const;
};

struct RunConfig {
    Mode mode = Mode::Forward;
    struct {
        int order = 7;
        int boundary_vertices = 64;
        int rings = 16;
        int symmetry = 0;
        InitialShape initial;
    } geometry;
    struct {
        double dt = 0.05;
        double final_time = 5.0;
    } time;
    std::optional<ScheduleSpec> schedule;
    std::optional<InitialFieldSpec> initial_field;
    struct {
        double delta = 0.0;
        std::uint64_t seed = 0;
    } noise;
    struct {
        int order = 7;
        int boundary_vertices = 64;
        int rings = 16;
        int symmetry = 0;
        std::optional<double> um0;
    } inverse;
    struct {
        std::string input_tube;
        std::string output_tube;
        std::string noisy_tube;
        std::string output_schedule;
        std::string residual_log;
        std::string snapshots;
        std::string report;
        std::string plots;
    } paths;
};

// Validation failures throw Error(Config) with the offending field path.
RunConfig parse_config(const Json& doc);
Json load_config_file(const fs::path& path);

// Sets a dotted key ("time.dt") in a config document.
void set_config_value(Json& doc, const std::string& dotted_key, Json value);

forward::ForwardParams forward_params(const RunConfig& cfg);
inverse::InverseParams inverse_params(const RunConfig& cfg, double default_um0);
forward::MeltingSchedule prescribed_schedule(const RunConfig& cfg);

// Tube files: "# stefan-tube v1, M=<M>, dt=<dt>[, key=value...]" then rows
// "t, a_{-M}, ..., a_M".
void write_tube(std::ostream& out, const inverse::ObservedTube& tube);
void write_tube(const fs::path& path, const inverse::ObservedTube& tube);
inverse::ObservedTube read_tube(std::istream& in);
inverse::ObservedTube read_tube(const fs::path& path);

// Schedule files: "# stefan-schedule v1, um0=<um0>" then rows "t, u_m, du_m".
// The last row repeats the final slope.
void write_schedule(std::ostream& out, const forward::MeltingSchedule& schedule);
void write_schedule(const fs::path& path, const forward::MeltingSchedule& schedule);
forward::MeltingSchedule read_schedule(std::istream& in);
forward::MeltingSchedule read_schedule(const fs::path& path);

void write_snapshot(const fs::path& path, const forward::FieldSnapshot& snapshot);

// Writes to a sibling temporary and renames it over the target.
void write_atomic(const fs::path& path, const std::string& contents);

struct ScheduleComparison {
    double max_error_um = 0.0;
    double l2_error_um = 0.0;
    double relative_l2_error_um = 0.0;
    double max_error_rate = 0.0;
    double l2_error_rate = 0.0;
    double relative_l2_error_rate = 0.0;
};

ScheduleComparison compare_schedules(const forward::MeltingSchedule& reconstructed,
                                     const forward::MeltingSchedule& truth);

struct PlotSeries {
    std::string label;
    forward::MeltingSchedule schedule;
};

// boundary_polylines.csv, schedule_series.csv and tube_boundaries.svg in dir.
void export_plot_data(const fs::path& dir, const forward::SpaceTimeTube& tube, std::size_t samples,
                      const std::vector<PlotSeries>& series);

// Runs one configured pipeline; returns 0 on success.
int run(const RunConfig& cfg, std::ostream& log);

} // namespace stefan::io
