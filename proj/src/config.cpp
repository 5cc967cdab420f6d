#include "chbctl/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "chbctl/errors.hpp"

namespace chb {

namespace {

// Keep in sync with config/default.cfg (checked by the harness tests).
constexpr const char* kDefaults = R"(# chbctl default configuration
[run]
seed = 20240917

[mesh]
n = 64

[time]
dt = 1e-3
theta = 1
T = 1

[system]
gamma = 1
phibar = 0.5
region_a = 0.3
region_b = 0.7
f_s = sine 1 0.1
allow_decoupled = false

[steady]
tol = 1e-12
maxit = 500
smallness_factor = 0.5

[initial]
w = sine 1 0.1
psi = cosine 1 0.1

[simulate]
model = linear
write_every = 10

[hum]
epsilon = 1e-6
cg_tol = 1e-10
maxit = 500
pad_T0 = 0

[sweep]
horizons = 1 0.5 0.25 0.125
epsilons = 1e-6
fit_m = 4
threads = 0

[source]
p = 3
q = 1.05
M = 1
m = 4
Kmax = 12
tail_tol = 1e-8
refine_passes = 4
g1 = sine 2 1
g2 = cosine 1 1
start_from_initial = true

[nonlinear]
y0_norm = 1e-2
tol = 1e-8
maxit = 20
radius = 5e-2

[carleman]
s = 0
mu0 = 1
C = 1
lambda = 2
k = 5
m = 4
T = 1
O0_a = 0.4
O0_b = 0.6
samples = 20
)";

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* what) {
    throw ConfigError("config key '" + key + "': cannot read '" + value + "' as " + what);
}

}  // namespace

const Config& Config::defaults() {
    static const Config d = [] {
        std::istringstream in(kDefaults);
        return parse(in, "<defaults>");
    }();
    return d;
}

Config Config::parse(std::istream& in, const std::string& origin) {
    Config c;
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::string where = origin + ":" + std::to_string(lineno);
        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError(where + ": unterminated section header");
            section = trim(line.substr(1, line.size() - 2));
            if (section.empty()) throw ConfigError(where + ": empty section name");
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError(where + ": expected 'key = value'");
        std::string key = trim(line.substr(0, eq));
        if (key.empty()) throw ConfigError(where + ": empty key");
        if (key.find('.') == std::string::npos) {
            if (section.empty()) throw ConfigError(where + ": key '" + key + "' outside any section");
            key = section + "." + key;
        }
        c.values_[key] = trim(line.substr(eq + 1));
    }
    return c;
}

Config Config::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    return parse(in, path.string());
}

void Config::apply_override(const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) throw ConfigError("override '" + assignment + "' is not key=value");
    const std::string key = trim(assignment.substr(0, eq));
    if (key.find('.') == std::string::npos) throw ConfigError("override key '" + key + "' needs a section prefix");
    values_[key] = trim(assignment.substr(eq + 1));
}

std::string Config::get_string(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("missing config key '" + key + "'");
    return it->second;
}

double Config::get_double(const std::string& key) const {
    const std::string v = get_string(key);
    double out = 0.0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size()) bad_value(key, v, "a number");
    return out;
}

int Config::get_int(const std::string& key) const {
    const std::string v = get_string(key);
    int out = 0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size()) bad_value(key, v, "an integer");
    return out;
}

unsigned long long Config::get_uint(const std::string& key) const {
    const std::string v = get_string(key);
    unsigned long long out = 0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size()) bad_value(key, v, "an unsigned integer");
    return out;
}

bool Config::get_bool(const std::string& key) const {
    const std::string v = get_string(key);
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    bad_value(key, v, "a boolean");
}

std::vector<double> Config::get_list(const std::string& key) const {
    std::string v = get_string(key);
    for (char& ch : v)
        if (ch == ',') ch = ' ';
    std::istringstream in(v);
    std::vector<double> out;
    std::string tok;
    while (in >> tok) {
        double x = 0.0;
        const auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), x);
        if (ec != std::errc() || p != tok.data() + tok.size()) bad_value(key, tok, "a number");
        out.push_back(x);
    }
    if (out.empty()) bad_value(key, v, "a non-empty list");
    return out;
}

std::vector<std::string> Config::unknown_keys(const Config& reference) const {
    std::vector<std::string> out;
    for (const auto& [k, v] : values_)
        if (!reference.contains(k)) out.push_back(k);
    return out;
}

std::string Config::to_string() const {
    std::ostringstream out;
    std::string section;
    for (const auto& [key, value] : values_) {
        const auto dot = key.find('.');
        const std::string s = key.substr(0, dot);
        if (s != section) {
            out << (section.empty() ? "" : "\n") << '[' << s << "]\n";
            section = s;
        }
        out << key.substr(dot + 1) << " = " << value << '\n';
    }
    return out.str();
}

Config resolve_config(const std::filesystem::path* file, const std::vector<std::string>& overrides) {
    Config c = Config::defaults();
    Config user;
    if (file) user = Config::load(*file);
    for (const auto& o : overrides) user.apply_override(o);
    const auto unknown = user.unknown_keys(Config::defaults());
    if (!unknown.empty()) {
        std::string msg = "unknown config keys:";
        for (const auto& k : unknown) msg += " " + k;
        throw ConfigError(msg);
    }
    for (const auto& [k, v] : user.entries()) c.set(k, v);
    return c;
}

}  // namespace chb
