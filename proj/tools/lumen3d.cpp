// lumen3d: batch photometric-stereo / RTI pipeline driven by a JSON job file.

#include "lumen3d/errors.hpp"
#include "lumen3d/pipeline.hpp"

#include "CLI11.hpp"

#include <functional>
#include <iostream>
#include <map>

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"lumen3d - photometric stereo and RTI surface capture"};
    app.set_version_flag("--version", lumen3d::tool_version());
    app.require_subcommand(1, 1);

    std::string jobPath;
    bool force = false;
    std::vector<double> light;
    double intensity = 0.0;
    double elevation = 0.0;
    int count = 0;

    using Command = std::function<void(const lumen3d::JobConfig&, const lumen3d::RunOptions&)>;
    const std::vector<std::tuple<std::string, std::string, Command>> commands = {
        {"calibrate", "estimate light directions and intensities", lumen3d::cmd_calibrate},
        {"solve", "recover normals and albedo", lumen3d::cmd_solve},
        {"integrate", "integrate normals into a depth map and mesh", lumen3d::cmd_integrate},
        {"relight", "render the solved surface under a virtual light", lumen3d::cmd_relight},
        {"sweep", "render a raking-light azimuth sweep", lumen3d::cmd_sweep},
        {"fit-ptm", "fit a polynomial texture map", lumen3d::cmd_fit_ptm},
        {"export-viewer", "write the viewer bundle", lumen3d::cmd_export_viewer},
    };

    std::map<CLI::App*, Command> handlers;
    std::map<std::string, CLI::App*> subs;
    for (const auto& [name, help, fn] : commands)
    {
        CLI::App* sub = app.add_subcommand(name, help);
        sub->add_option("--job", jobPath, "job file (JSON)")->required();
        sub->add_flag("--force", force, "overwrite existing outputs");
        handlers[sub] = fn;
        subs[name] = sub;
    }
    subs["relight"]->add_option("--light", light, "unit light direction x,y,z")->delimiter(',')->expected(3);
    subs["relight"]->add_option("--intensity", intensity, "light intensity")->check(CLI::PositiveNumber);
    subs["sweep"]->add_option("--elevation", elevation, "elevation in degrees")->check(CLI::Range(0.0, 90.0));
    subs["sweep"]->add_option("--count", count, "number of azimuths")->check(CLI::PositiveNumber);

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::CallForHelp& e)
    {
        return app.exit(e);
    }
    catch (const CLI::CallForVersion& e)
    {
        return app.exit(e);
    }
    catch (const CLI::ParseError& e)
    {
        app.exit(e);
        return kExitConfig;
    }

    try
    {
        lumen3d::RunOptions options;
        options.force = force;
        options.log = &std::cerr;
        CLI::App* sub = app.get_subcommands().front();
        // Only relight and sweep carry these options.
        auto given = [sub](const char* name) {
            const CLI::Option* opt = sub->get_option_no_throw(name);
            return opt && opt->count() > 0;
        };
        if (given("--light"))
            options.light = lumen3d::Vec3(light[0], light[1], light[2]);
        if (given("--intensity"))
            options.intensity = intensity;
        if (given("--elevation"))
            options.elevation = elevation;
        if (given("--count"))
            options.count = count;

        const lumen3d::JobConfig job = lumen3d::load_job(jobPath);
        handlers.at(sub)(job, options);
    }
    catch (const lumen3d::ConfigError& e)
    {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    }
    catch (const lumen3d::Error& e)
    {
        std::cerr << "data error: " << e.what() << '\n';
        return kExitData;
    }
    catch (const std::exception& e)
    {
        std::cerr << "error: " << e.what() << '\n';
        return kExitData;
    }
    return 0;
}
