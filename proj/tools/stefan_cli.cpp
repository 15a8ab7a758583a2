// Command-line front end; talks to the library only through the C API.
#include "stefan/stefan.h"

#include <CLI11.hpp>

#include <cstdio>
#include <memory>
#include <optional>
#include <string>

namespace {

struct ConfigDeleter {
    void operator()(stefan_config* c) const { stefan_config_free(c); }
};
using ConfigPtr = std::unique_ptr<stefan_config, ConfigDeleter>;

int fail(stefan_status status) {
    std::fprintf(stderr, "stefan: error %d: %s\n", static_cast<int>(status), stefan_last_error());
    return static_cast<int>(status);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Stefan problem with time-varying melting temperature: forward front tracking and "
                 "melting-temperature reconstruction"};
    app.set_version_flag("--version", std::string(stefan_version()));

    std::string config_path;
    std::string mode;
    std::optional<double> dt, final_time, delta, um0;
    std::optional<int> order;
    std::optional<long long> seed;
    std::string preset, out, input;
    bool quiet = false;

    app.add_option("mode", mode, "forward | perturb | invert | roundtrip (overrides the config)")
        ->check(CLI::IsMember({"forward", "perturb", "invert", "roundtrip"}));
    app.add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
    app.add_option("--dt", dt, "time step");
    app.add_option("--T", final_time, "final time");
    app.add_option("--M", order, "Fourier order (2M+1 coefficients)");
    app.add_option("--delta", delta, "relative noise level");
    app.add_option("--seed", seed, "noise seed")->check(CLI::NonNegativeNumber);
    app.add_option("--preset", preset, "melting schedule preset")
        ->check(CLI::IsMember({"quadratic", "cosine"}));
    app.add_option("--um0", um0, "melting temperature at t = 0 for the reconstruction");
    app.add_option("--out", out, "primary output path (tube, schedule or report by mode)");
    app.add_option("--input", input, "input tube for perturb / invert");
    app.add_flag("-q,--quiet", quiet, "suppress progress output");

    CLI11_PARSE(app, argc, argv);

    stefan_config* raw = nullptr;
    stefan_status st = config_path.empty() ? stefan_config_new(&raw) : stefan_config_load(config_path.c_str(), &raw);
    if (st != STEFAN_OK) return fail(st);
    ConfigPtr cfg(raw);

    auto set_number = [&](const char* key, const auto& value) {
        if (value && st == STEFAN_OK) st = stefan_config_set_number(cfg.get(), key, static_cast<double>(*value));
    };
    auto set_string = [&](const char* key, const std::string& value) {
        if (!value.empty() && st == STEFAN_OK) st = stefan_config_set_string(cfg.get(), key, value.c_str());
    };

    set_string("mode", mode);
    set_number("time.dt", dt);
    set_number("time.T", final_time);
    set_number("noise.delta", delta);
    set_number("inverse.um0", um0);
    if (order && st == STEFAN_OK) st = stefan_config_set_integer(cfg.get(), "geometry.M", *order);
    if (seed && st == STEFAN_OK) st = stefan_config_set_integer(cfg.get(), "noise.seed", *seed);
    if (!preset.empty() && st == STEFAN_OK) {
        st = stefan_config_remove(cfg.get(), "schedule.samples");
        if (st == STEFAN_OK) st = stefan_config_set_string(cfg.get(), "schedule.preset", preset.c_str());
    }
    set_string("paths.out", out);
    set_string("paths.input_tube", input);
    if (st != STEFAN_OK) return fail(st);

    st = stefan_run(cfg.get(), quiet ? 0 : 1);
    if (st != STEFAN_OK) return fail(st);
    return 0;
}
