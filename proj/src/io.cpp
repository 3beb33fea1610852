#include "oppnet/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <iomanip>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <json.hpp>

namespace oppnet {

namespace pt = boost::property_tree;

namespace {

std::string join(const std::vector<std::string>& parts, const std::string& sep)
{
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i)
        out += (i ? sep : "") + parts[i];
    return out;
}

std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos)
        return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep)
{
    std::vector<std::string> out;
    std::string cur;
    std::istringstream in(s);
    while (std::getline(in, cur, sep))
        out.push_back(trim(cur));
    if (!s.empty() && s.back() == sep)
        out.push_back("");
    return out;
}

std::optional<double> to_double(const std::string& s)
{
    if (s == "inf" || s == "+inf" || s == "infinity")
        return std::numeric_limits<double>::infinity();
    double v = 0.0;
    const char* end = s.data() + s.size();
    auto [p, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc() || p != end || std::isnan(v))
        return std::nullopt;
    return v;
}

template <class Int>
std::optional<Int> to_int(const std::string& s)
{
    Int v{};
    const char* end = s.data() + s.size();
    auto [p, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc() || p != end)
        return std::nullopt;
    return v;
}

const std::map<std::string, std::set<std::string>> section_keys{
    {"rates", {"family", "mean", "cv", "low", "high", "value", "values"}},
    {"popularity", {"family", "alpha", "n_min", "n_max", "n", "pmf"}},
    {"availability", {"kind", "form", "c", "k", "table", "pmf"}},
    {"scenario",
     {"nodes", "contents", "seed", "replications", "threads", "horizon", "selection", "sampling", "contact_law", "t0"}},
    {"protocol", {"kind", "cooperation", "limit"}},
    {"metrics", {"ttl", "view", "pool"}},
    {"offload", {"budget", "policies", "update_every"}},
    {"validate", {"nodes"}},
    {"output", {"dir", "results", "plot", "append"}},
};

class Reader {
public:
    Reader(const pt::ptree& root, std::vector<std::string>& errors) : root_(root), errors_(errors) {}

    std::optional<std::string> raw(const std::string& section, const std::string& key, bool required)
    {
        used_.insert(section + "." + key);
        auto sec = root_.get_child_optional(section);
        if (sec) {
            auto v = sec->get_child_optional(pt::ptree::path_type(key, '\0'));
            if (v)
                return trim(v->data());
        }
        if (required)
            errors_.push_back(section + "." + key + ": required key missing");
        return std::nullopt;
    }

    void text(const std::string& s, const std::string& k, std::string& out, bool required = false)
    {
        if (auto v = raw(s, k, required))
            out = *v;
    }

    void number(const std::string& s, const std::string& k, double& out, bool required = false)
    {
        if (auto v = raw(s, k, required)) {
            if (auto d = to_double(*v))
                out = *d;
            else
                bad(s, k, "expected a number");
        }
    }

    template <class Int>
    void integer(const std::string& s, const std::string& k, Int& out, bool required = false)
    {
        if (auto v = raw(s, k, required)) {
            if (auto d = to_int<Int>(*v))
                out = *d;
            else
                bad(s, k, "expected an integer");
        }
    }

    void boolean(const std::string& s, const std::string& k, bool& out)
    {
        if (auto v = raw(s, k, false)) {
            if (*v == "true")
                out = true;
            else if (*v == "false")
                out = false;
            else
                bad(s, k, "expected true or false");
        }
    }

    void numbers(const std::string& s, const std::string& k, std::vector<double>& out, bool required = false)
    {
        if (auto v = raw(s, k, required)) {
            out.clear();
            if (v->empty())
                return;
            for (const auto& item : split(*v, ',')) {
                if (auto d = to_double(item))
                    out.push_back(*d);
                else
                    return bad(s, k, "expected a comma-separated list of numbers");
            }
        }
    }

    void integers(const std::string& s, const std::string& k, std::vector<int>& out)
    {
        if (auto v = raw(s, k, false)) {
            out.clear();
            if (v->empty())
                return;
            for (const auto& item : split(*v, ',')) {
                if (auto d = to_int<int>(item))
                    out.push_back(*d);
                else
                    return bad(s, k, "expected a comma-separated list of integers");
            }
        }
    }

    void words(const std::string& s, const std::string& k, std::vector<std::string>& out)
    {
        if (auto v = raw(s, k, false)) {
            out.clear();
            if (!v->empty())
                out = split(*v, ',');
        }
    }

    void table(const std::string& s, const std::string& k, std::map<int, double>& out, bool required = false)
    {
        if (auto v = raw(s, k, required)) {
            out.clear();
            for (const auto& item : split(*v, ',')) {
                const auto colon = item.find(':');
                std::optional<int> n;
                std::optional<double> w;
                if (colon != std::string::npos) {
                    n = to_int<int>(trim(item.substr(0, colon)));
                    w = to_double(trim(item.substr(colon + 1)));
                }
                if (!n || !w)
                    return bad(s, k, "expected entries n:value separated by commas");
                if (!out.emplace(*n, *w).second)
                    return bad(s, k, "duplicate entry for " + std::to_string(*n));
            }
        }
    }

    /// Keys present in the text that no read consulted.
    void report_unknown()
    {
        for (const auto& [section, child] : root_) {
            if (!section_keys.count(section)) {
                errors_.push_back(child.empty() && !child.data().empty() ? section + ": key outside any section"
                                                                          : "[" + section + "]: unknown section");
                continue;
            }
            for (const auto& [key, value] : child)
                if (!used_.count(section + "." + key))
                    errors_.push_back(section + "." + key
                                      + (section_keys.at(section).count(key) ? ": not valid in this configuration"
                                                                              : ": unknown key"));
        }
    }

private:
    void bad(const std::string& s, const std::string& k, const std::string& what)
    {
        errors_.push_back(s + "." + k + ": " + what);
    }

    const pt::ptree& root_;
    std::vector<std::string>& errors_;
    std::set<std::string> used_;
};

void read_rates(Reader& r, RateSpec& spec)
{
    r.text("rates", "family", spec.family, true);
    const auto& f = spec.family;
    if (f == "gamma" || f == "pareto") {
        r.number("rates", "mean", spec.mean, true);
        r.number("rates", "cv", spec.cv, true);
    } else if (f == "uniform") {
        r.number("rates", "low", spec.low, true);
        r.number("rates", "high", spec.high, true);
    } else if (f == "constant") {
        r.number("rates", "value", spec.value, true);
    } else if (f == "empirical") {
        r.numbers("rates", "values", spec.values, true);
    }
}

void read_popularity(Reader& r, PopularitySpec& spec)
{
    r.text("popularity", "family", spec.family, true);
    const auto& f = spec.family;
    if (f == "zipf" || f == "bounded_pareto") {
        r.number("popularity", "alpha", spec.alpha, true);
        r.integer("popularity", "n_min", spec.n_min, true);
        r.integer("popularity", "n_max", spec.n_max, true);
    } else if (f == "degenerate") {
        r.integer("popularity", "n", spec.n, true);
    } else if (f == "explicit") {
        r.table("popularity", "pmf", spec.pmf, true);
    }
}

void read_availability(Reader& r, AvailabilitySpec& spec)
{
    r.text("availability", "kind", spec.kind, true);
    if (spec.kind == "uncorrelated") {
        r.table("availability", "pmf", spec.pmf, true);
        return;
    }
    if (spec.kind != "deterministic" && spec.kind != "binomial")
        return;
    r.text("availability", "form", spec.form);
    if (spec.form == "table") {
        r.table("availability", "table", spec.table, true);
        return;
    }
    r.number("availability", "c", spec.c, true);
    if (spec.form == "power")
        r.number("availability", "k", spec.k, true);
}

void check(std::vector<std::string>& errors, bool ok, const std::string& message)
{
    if (!ok)
        errors.push_back(message);
}

template <class F>
void try_build(std::vector<std::string>& errors, const std::string& where, F&& f)
{
    try {
        f();
    } catch (const std::exception& e) {
        errors.push_back(where + ": " + e.what());
    }
}

bool one_of(const std::string& v, std::initializer_list<const char*> options)
{
    for (const char* o : options)
        if (v == o)
            return true;
    return false;
}

RateModel make_rates(const RateSpec& s)
{
    if (s.family == "gamma")
        return RateModel::gamma(s.mean, s.cv);
    if (s.family == "pareto")
        return RateModel::pareto_mean_cv(s.mean, s.cv);
    if (s.family == "uniform")
        return RateModel::uniform(s.low, s.high);
    if (s.family == "constant")
        return RateModel::constant(s.value);
    if (s.family == "empirical")
        return RateModel::empirical(s.values);
    throw std::invalid_argument("unknown family '" + s.family + "'");
}

PopularityModel make_popularity(const PopularitySpec& s)
{
    if (s.family == "zipf")
        return PopularityModel::zipf(s.alpha, s.n_min, s.n_max);
    if (s.family == "bounded_pareto")
        return PopularityModel::bounded_pareto(s.alpha, s.n_min, s.n_max);
    if (s.family == "degenerate")
        return PopularityModel::degenerate(s.n);
    if (s.family == "explicit")
        return PopularityModel::explicit_pmf(s.pmf);
    throw std::invalid_argument("unknown family '" + s.family + "'");
}

AvailabilityRule make_rule(const AvailabilitySpec& s)
{
    if (s.kind == "uncorrelated")
        return AvailabilityRule::uncorrelated(s.pmf);
    AvailabilityFunction fn = AvailabilityFunction::linear(s.c);
    if (s.form == "power")
        fn = AvailabilityFunction::power(s.c, s.k);
    else if (s.form == "log")
        fn = AvailabilityFunction::log(s.c);
    else if (s.form == "sqrt")
        fn = AvailabilityFunction::sqrt(s.c);
    else if (s.form == "table")
        fn = AvailabilityFunction::table(s.table);
    else if (s.form != "linear")
        throw std::invalid_argument("unknown form '" + s.form + "'");
    if (s.kind == "deterministic")
        return AvailabilityRule::deterministic(fn);
    if (s.kind == "binomial")
        return AvailabilityRule::binomial(fn);
    throw std::invalid_argument("unknown kind '" + s.kind + "'");
}

void collect_violations(const ExperimentConfig& c, std::vector<std::string>& errors)
{
    const auto& s = c.scenario;
    check(errors, s.nodes >= 2, "scenario.nodes: N must be >= 2");
    check(errors, s.contents >= 1, "scenario.contents: M must be >= 1");
    check(errors, s.replications >= 1, "scenario.replications: must be >= 1");
    check(errors, s.threads >= 0, "scenario.threads: must be >= 0");
    check(errors, s.horizon > 0.0, "scenario.horizon: must be > 0");
    check(errors, std::isfinite(s.t0) && s.t0 > 0.0, "scenario.t0: must be > 0");
    check(errors, one_of(s.selection, {"uniform", "weighted"}), "scenario.selection: expected uniform or weighted");
    check(errors, one_of(s.sampling, {"stratified", "iid"}), "scenario.sampling: expected stratified or iid");
    check(errors, one_of(s.contact_law, {"exponential", "pareto"}),
          "scenario.contact_law: expected exponential or pareto");

    const auto& r = c.rates;
    if (!one_of(r.family, {"gamma", "pareto", "uniform", "constant", "empirical"})) {
        if (!r.family.empty())
            errors.push_back("rates.family: unknown family '" + r.family + "'");
    } else {
        const auto before = errors.size();
        if (r.family == "gamma" || r.family == "pareto") {
            check(errors, std::isfinite(r.mean) && r.mean > 0.0, "rates.mean: μ_λ must be > 0");
            check(errors, r.cv >= 0.0, "rates.cv: CV_λ must be ≥ 0");
            check(errors, std::isfinite(r.cv), "rates.cv: must be finite");
            check(errors, r.family != "pareto" || r.cv != 0.0, "rates.cv: pareto rates need CV_λ > 0");
        }
        if (errors.size() == before)
            try_build(errors, "rates", [&] { make_rates(r); });
    }

    const auto& p = c.popularity;
    if (!one_of(p.family, {"zipf", "bounded_pareto", "degenerate", "explicit"})) {
        if (!p.family.empty())
            errors.push_back("popularity.family: unknown family '" + p.family + "'");
    } else {
        try_build(errors, "popularity", [&] {
            auto pop = make_popularity(p);
            if (s.nodes >= 2 && pop.n_max() > s.nodes)
                throw std::invalid_argument("support exceeds scenario.nodes");
        });
    }

    const auto& a = c.availability;
    if (!one_of(a.kind, {"deterministic", "binomial", "uncorrelated"})) {
        if (!a.kind.empty())
            errors.push_back("availability.kind: unknown kind '" + a.kind + "'");
    } else if (a.kind != "uncorrelated" && !one_of(a.form, {"linear", "power", "log", "sqrt", "table"})) {
        errors.push_back("availability.form: unknown form '" + a.form + "'");
    } else {
        try_build(errors, "availability", [&] { make_rule(a); });
    }

    const auto& pr = c.protocol;
    check(errors, one_of(pr.kind, {"static", "multihop"}), "protocol.kind: expected static or multihop");
    check(errors, pr.cooperation >= 0.0 && pr.cooperation <= 1.0, "protocol.cooperation: must lie in [0, 1]");
    check(errors, pr.limit >= 0.0, "protocol.limit: must be >= 0");
    check(errors, !(pr.kind == "multihop" && s.contact_law == "pareto"),
          "protocol.kind: multihop is not supported with contact_law = pareto");

    const auto& m = c.metrics;
    check(errors, !m.ttl.empty(), "metrics.ttl: at least one value required");
    for (double t : m.ttl)
        check(errors, std::isfinite(t) && t >= 0.0, "metrics.ttl: values must be finite and >= 0");
    check(errors, one_of(m.view, {"analytic", "realized"}), "metrics.view: expected analytic or realized");
    check(errors, m.pool >= 1000, "metrics.pool: must be >= 1000");

    const auto& o = c.offload;
    check(errors, std::isfinite(o.budget) && o.budget > 0.0, "offload.budget: c_M must be > 0");
    check(errors, o.update_every >= 0, "offload.update_every: must be >= 0");
    for (const auto& name : o.policies) {
        if (one_of(name, {"qos", "sqrt", "log", "uniform", "random", "blind"}))
            continue;
        if (name.rfind("power:", 0) == 0) {
            auto k = to_double(name.substr(6));
            check(errors, k && std::isfinite(*k) && *k >= 0.0, "offload.policies: bad exponent in '" + name + "'");
        } else {
            errors.push_back("offload.policies: unknown policy '" + name + "'");
        }
    }

    for (int n : c.validate.nodes)
        check(errors, n >= 2, "validate.nodes: every N must be >= 2");

    check(errors, !c.output.dir.empty(), "output.dir: must not be empty");
    check(errors, !c.output.results.empty(), "output.results: must not be empty");
    check(errors, !c.output.plot.empty(), "output.plot: must not be empty");
}

std::string format_table(const std::map<int, double>& t)
{
    std::vector<std::string> parts;
    for (const auto& [n, v] : t)
        parts.push_back(std::to_string(n) + ":" + format_number(v));
    return join(parts, ", ");
}

std::string format_list(const std::vector<double>& v)
{
    std::vector<std::string> parts;
    for (double x : v)
        parts.push_back(format_number(x));
    return join(parts, ", ");
}

} // namespace

ConfigError::ConfigError(std::vector<std::string> violations)
    : std::invalid_argument("invalid configuration:\n  " + join(violations, "\n  ")),
      violations_(std::move(violations))
{
}

std::string format_number(double v)
{
    if (std::isinf(v))
        return v > 0 ? "inf" : "-inf";
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, p);
}

ExperimentConfig parse_config(const std::string& text,
                              const std::vector<std::pair<std::string, std::string>>& overrides)
{
    pt::ptree root;
    try {
        std::istringstream in(text);
        pt::read_ini(in, root);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError({"line " + std::to_string(e.line()) + ": " + e.message()});
    }

    std::vector<std::string> errors;
    for (const auto& [path, value] : overrides) {
        const auto dot = path.find('.');
        if (dot == std::string::npos || dot == 0 || dot + 1 == path.size()
            || path.find('.', dot + 1) != std::string::npos) {
            errors.push_back("override '" + path + "': expected section.key");
            continue;
        }
        const pt::ptree::path_type section(path.substr(0, dot), '\0');
        if (!root.get_child_optional(section))
            root.add_child(section, pt::ptree());
        root.get_child(section).put(pt::ptree::path_type(path.substr(dot + 1), '\0'), value);
    }

    ExperimentConfig c;
    Reader r(root, errors);
    read_rates(r, c.rates);
    read_popularity(r, c.popularity);
    read_availability(r, c.availability);

    auto& s = c.scenario;
    r.integer("scenario", "nodes", s.nodes, true);
    r.integer("scenario", "contents", s.contents);
    r.integer("scenario", "seed", s.seed);
    r.integer("scenario", "replications", s.replications);
    r.integer("scenario", "threads", s.threads);
    r.number("scenario", "horizon", s.horizon);
    r.text("scenario", "selection", s.selection);
    r.text("scenario", "sampling", s.sampling);
    r.text("scenario", "contact_law", s.contact_law);
    r.number("scenario", "t0", s.t0);

    r.text("protocol", "kind", c.protocol.kind);
    if (c.protocol.kind == "multihop") {
        r.number("protocol", "cooperation", c.protocol.cooperation);
        r.number("protocol", "limit", c.protocol.limit);
    }

    r.numbers("metrics", "ttl", c.metrics.ttl);
    r.text("metrics", "view", c.metrics.view);
    r.integer("metrics", "pool", c.metrics.pool);

    r.number("offload", "budget", c.offload.budget);
    r.words("offload", "policies", c.offload.policies);
    r.integer("offload", "update_every", c.offload.update_every);

    r.integers("validate", "nodes", c.validate.nodes);

    r.text("output", "dir", c.output.dir);
    r.text("output", "results", c.output.results);
    r.text("output", "plot", c.output.plot);
    r.boolean("output", "append", c.output.append);

    r.report_unknown();
    collect_violations(c, errors);
    if (!errors.empty())
        throw ConfigError(std::move(errors));
    return c;
}

void validate_config(const ExperimentConfig& config)
{
    std::vector<std::string> errors;
    collect_violations(config, errors);
    if (!errors.empty())
        throw ConfigError(std::move(errors));
}

std::string serialize_config(const ExperimentConfig& c)
{
    std::ostringstream o;
    auto kv = [&](const std::string& k, const std::string& v) { o << k << (v.empty() ? " =" : " = ") << v << '\n'; };
    auto num = [&](const std::string& k, double v) { kv(k, format_number(v)); };

    o << "[rates]\n";
    kv("family", c.rates.family);
    const auto& rf = c.rates.family;
    if (rf == "gamma" || rf == "pareto") {
        num("mean", c.rates.mean);
        num("cv", c.rates.cv);
    } else if (rf == "uniform") {
        num("low", c.rates.low);
        num("high", c.rates.high);
    } else if (rf == "constant") {
        num("value", c.rates.value);
    } else if (rf == "empirical") {
        kv("values", format_list(c.rates.values));
    }

    o << "\n[popularity]\n";
    kv("family", c.popularity.family);
    const auto& pf = c.popularity.family;
    if (pf == "zipf" || pf == "bounded_pareto") {
        num("alpha", c.popularity.alpha);
        kv("n_min", std::to_string(c.popularity.n_min));
        kv("n_max", std::to_string(c.popularity.n_max));
    } else if (pf == "degenerate") {
        kv("n", std::to_string(c.popularity.n));
    } else if (pf == "explicit") {
        kv("pmf", format_table(c.popularity.pmf));
    }

    o << "\n[availability]\n";
    kv("kind", c.availability.kind);
    if (c.availability.kind == "uncorrelated") {
        kv("pmf", format_table(c.availability.pmf));
    } else {
        kv("form", c.availability.form);
        if (c.availability.form == "table") {
            kv("table", format_table(c.availability.table));
        } else {
            num("c", c.availability.c);
            if (c.availability.form == "power")
                num("k", c.availability.k);
        }
    }

    const auto& s = c.scenario;
    o << "\n[scenario]\n";
    kv("nodes", std::to_string(s.nodes));
    kv("contents", std::to_string(s.contents));
    kv("seed", std::to_string(s.seed));
    kv("replications", std::to_string(s.replications));
    kv("threads", std::to_string(s.threads));
    num("horizon", s.horizon);
    kv("selection", s.selection);
    kv("sampling", s.sampling);
    kv("contact_law", s.contact_law);
    num("t0", s.t0);

    o << "\n[protocol]\n";
    kv("kind", c.protocol.kind);
    if (c.protocol.kind == "multihop") {
        num("cooperation", c.protocol.cooperation);
        num("limit", c.protocol.limit);
    }

    o << "\n[metrics]\n";
    kv("ttl", format_list(c.metrics.ttl));
    kv("view", c.metrics.view);
    kv("pool", std::to_string(c.metrics.pool));

    o << "\n[offload]\n";
    num("budget", c.offload.budget);
    kv("policies", join(c.offload.policies, ", "));
    kv("update_every", std::to_string(c.offload.update_every));

    o << "\n[validate]\n";
    std::vector<std::string> ns;
    for (int n : c.validate.nodes)
        ns.push_back(std::to_string(n));
    kv("nodes", join(ns, ", "));

    o << "\n[output]\n";
    kv("dir", c.output.dir);
    kv("results", c.output.results);
    kv("plot", c.output.plot);
    kv("append", c.output.append ? "true" : "false");
    return o.str();
}

std::string fnv1a_hex(const std::string& bytes)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : bytes) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    std::ostringstream o;
    o << std::hex << std::setw(16) << std::setfill('0') << h;
    return o.str();
}

std::string scenario_hash(const ExperimentConfig& config)
{
    ExperimentConfig c = config;
    c.output = OutputSpec{};
    c.scenario.threads = 0;
    const std::string text = serialize_config(c);
    return fnv1a_hex(text.substr(0, text.find("\n[output]")));
}

Models build_models(const ExperimentConfig& config)
{
    return {make_rates(config.rates), make_popularity(config.popularity), make_rule(config.availability)};
}

BuildOptions build_options(const ExperimentConfig& config)
{
    BuildOptions o;
    o.selection = config.scenario.selection == "weighted" ? HolderSelection::WeightedByProductOfRatesToRequesters
                                                          : HolderSelection::UniformRandom;
    o.sampling = config.scenario.sampling == "iid" ? PopularitySampling::Iid : PopularitySampling::Stratified;
    o.contact_law = config.scenario.contact_law == "pareto" ? ContactLaw::ParetoRenewal : ContactLaw::Exponential;
    o.t0 = config.scenario.t0;
    o.protocol = config.protocol.kind == "multihop"
                     ? Protocol::multihop(config.protocol.cooperation, config.protocol.limit)
                     : Protocol::fixed();
    return o;
}

HolderView holder_view(const ExperimentConfig& config)
{
    return config.metrics.view == "realized" ? HolderView::Realized : HolderView::Analytic;
}

// ---------------------------------------------------------------------------

TraceError::TraceError(std::size_t line, const std::string& message)
    : std::runtime_error(line ? "trace line " + std::to_string(line) + ": " + message : "trace: " + message),
      line_(line)
{
}

TraceFit ingest_trace(std::istream& in, std::optional<double> duration)
{
    TraceFit fit;
    std::map<std::string, int> ids;
    auto id_of = [&](const std::string& token) {
        auto [it, fresh] = ids.emplace(token, static_cast<int>(ids.size()));
        if (fresh)
            fit.trace.original_ids.push_back(token);
        return it->second;
    };

    std::string line;
    std::size_t number = 0;
    bool seen_line = false;
    while (std::getline(in, line)) {
        ++number;
        line = trim(line);
        if (line.empty() || line[0] == '#')
            continue;
        const auto fields = split(line, ',');
        if (fields.size() != 3)
            throw TraceError(number, "expected 3 fields t,i,j, got " + std::to_string(fields.size()));
        auto t = to_double(fields[0]);
        if (!t) {
            if (!seen_line) {
                seen_line = true; // header
                continue;
            }
            throw TraceError(number, "bad timestamp '" + fields[0] + "'");
        }
        seen_line = true;
        if (!std::isfinite(*t))
            throw TraceError(number, "timestamp must be finite");
        if (fields[1].empty() || fields[2].empty())
            throw TraceError(number, "empty node id");
        if (fields[1] == fields[2])
            throw TraceError(number, "node meets itself");
        if (!fit.trace.events.empty() && *t < fit.trace.events.back().t)
            throw TraceError(number, "timestamps must be non-decreasing");
        const int a = id_of(fields[1]), b = id_of(fields[2]);
        fit.trace.events.push_back({*t, a, b});
        ++fit.contacts[{std::min(a, b), std::max(a, b)}];
    }
    if (fit.trace.events.empty())
        throw TraceError(0, "no contact records");

    fit.trace.nodes = static_cast<int>(ids.size());
    fit.trace.start = fit.trace.events.front().t;
    fit.trace.duration = duration ? *duration : fit.trace.events.back().t - fit.trace.start;
    if (!(fit.trace.duration > 0.0) || !std::isfinite(fit.trace.duration))
        throw TraceError(0, "zero-duration trace");

    std::vector<double> rates;
    for (const auto& [pair, count] : fit.contacts) {
        const double rate = count / fit.trace.duration;
        fit.pair_rates[pair] = rate;
        rates.push_back(rate);
    }
    fit.model = RateModel::empirical(rates);
    fit.mean = fit.model.mean();
    fit.cv = fit.model.cv();
    return fit;
}

TraceFit ingest_trace_text(const std::string& text, std::optional<double> duration)
{
    std::istringstream in(text);
    return ingest_trace(in, duration);
}

// ---------------------------------------------------------------------------

void write_results(std::ostream& out, const std::vector<ResultRecord>& records, const std::string& hash)
{
    auto opt = [](const std::optional<double>& v) {
        return v && std::isfinite(*v) ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
    };
    for (const auto& r : records) {
        nlohmann::ordered_json j;
        j["name"] = r.name;
        j["value"] = std::isfinite(r.value) ? nlohmann::ordered_json(r.value) : nlohmann::ordered_json(nullptr);
        j["ci_low"] = opt(r.ci_low);
        j["ci_high"] = opt(r.ci_high);
        j["analytic_counterpart"] = opt(r.analytic_counterpart);
        j["scenario_hash"] = hash;
        out << j.dump() << '\n';
    }
}

void write_plot(std::ostream& out, const std::vector<PlotRow>& rows)
{
    out << "x,series,y,y_err\n";
    for (const auto& r : rows) {
        std::string series = r.series;
        if (series.find_first_of(",\"") != std::string::npos) {
            std::string q = "\"";
            for (char ch : series)
                q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
            series = q + "\"";
        }
        out << format_number(r.x) << ',' << series << ',' << format_number(r.y) << ','
            << (r.y_err ? format_number(*r.y_err) : "") << '\n';
    }
}

std::string output_directory(const ExperimentConfig& config)
{
    if (const char* env = std::getenv("OPPNET_OUTPUT_DIR"); env && *env)
        return env;
    return config.output.dir;
}

} // namespace oppnet
