// oppnet: analysis, simulation and offloading experiments from one config file.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "oppnet/experiment.hpp"

namespace fs = std::filesystem;
using namespace oppnet;

namespace {

using Overrides = std::vector<std::pair<std::string, std::string>>;

std::string read_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open " + path);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

Overrides split_sets(const std::vector<std::string>& sets)
{
    Overrides out;
    for (const auto& s : sets) {
        const auto eq = s.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("--set expects section.key=value, got '" + s + "'");
        out.emplace_back(s.substr(0, eq), s.substr(eq + 1));
    }
    return out;
}

// "--section.key value" and "--section.key=value" left over by CLI11
Overrides key_flags(const std::vector<std::string>& rest)
{
    Overrides out;
    for (std::size_t i = 0; i < rest.size(); ++i) {
        const auto& a = rest[i];
        if (a.rfind("--", 0) != 0 || a.find('.') == std::string::npos)
            throw std::runtime_error("unexpected argument '" + a + "'");
        const auto eq = a.find('=');
        if (eq != std::string::npos) {
            out.emplace_back(a.substr(2, eq - 2), a.substr(eq + 1));
        } else {
            if (i + 1 >= rest.size())
                throw std::runtime_error(a + " needs a value");
            out.emplace_back(a.substr(2), rest[++i]);
        }
    }
    return out;
}

void emit(const Report& report, const std::string& dir, const std::string& results, const std::string& plot,
          bool append, const std::string& hash)
{
    std::cout << report.table;
    fs::create_directories(dir);
    const auto results_path = fs::path(dir) / results;
    std::ofstream r(results_path, append ? std::ios::app : std::ios::trunc);
    if (!r)
        throw std::runtime_error("cannot write " + results_path.string());
    write_results(r, report.results, hash);
    if (!report.plot.empty()) {
        const auto plot_path = fs::path(dir) / plot;
        std::ofstream p(plot_path);
        if (!p)
            throw std::runtime_error("cannot write " + plot_path.string());
        write_plot(p, report.plot);
        std::cout << "plot data: " << plot_path.string() << '\n';
    }
    std::cout << "results:   " << results_path.string() << '\n';
}

struct ConfigArgs {
    std::string path;
    std::vector<std::string> sets;
    bool echo = false;
};

void add_config_options(CLI::App* sub, ConfigArgs& args)
{
    sub->add_option("-c,--config", args.path, "experiment config file");
    sub->add_option("--set", args.sets, "override, section.key=value (repeatable)");
    sub->add_flag("--echo-config", args.echo, "print the canonical config before running");
    sub->allow_extras();
    sub->footer("Any config key can also be given as --section.key value.");
}

ExperimentConfig load(const ConfigArgs& args, const CLI::App* sub)
{
    Overrides o = split_sets(args.sets);
    for (auto& kv : key_flags(sub->remaining()))
        o.push_back(std::move(kv));
    const std::string text = args.path.empty() ? std::string() : read_file(args.path);
    auto cfg = parse_config(text, o);
    if (args.echo)
        std::cout << serialize_config(cfg) << '\n';
    return cfg;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Content access delay and delivery probability in opportunistic networks"};
    app.require_subcommand(1);

    struct Command {
        const char* name;
        const char* help;
        Report (*run)(const ExperimentConfig&);
    };
    const Command commands[] = {
        {"analyze", "closed-form and numeric predictions", run_analyze},
        {"simulate", "Monte Carlo estimates next to predictions", run_simulate},
        {"validate", "relative error of prediction against simulation for each N", run_validate},
        {"optimize", "holder allocation tables per policy", run_optimize},
        {"offload-sim", "simulated offloading ratio per policy", run_offload_sim},
    };
    std::vector<std::pair<CLI::App*, const Command*>> subs;
    std::vector<ConfigArgs> args(std::size(commands));
    for (std::size_t i = 0; i < std::size(commands); ++i) {
        auto* sub = app.add_subcommand(commands[i].name, commands[i].help);
        add_config_options(sub, args[i]);
        subs.emplace_back(sub, &commands[i]);
    }

    std::string trace_path, fit_out, out_dir = "out", results = "ingest.jsonl", plot = "ingest_pairs.csv";
    double duration = 0.0;
    auto* ingest = app.add_subcommand("ingest", "fit a rate model to a contact trace (t,i,j CSV)");
    ingest->add_option("trace", trace_path, "trace file")->required();
    ingest->add_option("--duration", duration, "observation length (default: last minus first timestamp)");
    ingest->add_option("--fit-out", fit_out, "write the fitted [rates] section to this file");
    ingest->add_option("--output.dir", out_dir, "output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (ingest->parsed()) {
            const std::string text = read_file(trace_path);
            const auto fit = ingest_trace_text(text, duration > 0.0 ? std::optional<double>(duration) : std::nullopt);
            const auto out = run_ingest(fit);
            std::string dir = out_dir;
            if (const char* env = std::getenv("OPPNET_OUTPUT_DIR"); env && *env)
                dir = env;
            emit(out.report, dir, results, plot, false, fnv1a_hex(text));
            if (!fit_out.empty()) {
                std::ofstream f(fit_out);
                f << out.rates_section;
                std::cout << "fitted rates: " << fit_out << '\n';
            }
            return 0;
        }
        for (std::size_t i = 0; i < subs.size(); ++i) {
            auto [sub, cmd] = subs[i];
            if (!sub->parsed())
                continue;
            const auto cfg = load(args[i], sub);
            const auto report = cmd->run(cfg);
            emit(report, output_directory(cfg), cfg.output.results, cfg.output.plot, cfg.output.append,
                 scenario_hash(cfg));
            return 0;
        }
    } catch (const ConfigError& e) {
        std::cerr << "oppnet: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "oppnet: " << e.what() << '\n';
        return 1;
    }
    return 1;
}
