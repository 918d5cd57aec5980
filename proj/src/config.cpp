#include "datta/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace datta {

namespace {
std::string trim(const std::string &s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}
} // namespace

Config Config::from_string(const std::string &text) {
    Config c;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        size_t eq = t.find('=');
        if (eq == std::string::npos) throw std::runtime_error("config: missing '=' in line: " + t);
        std::string key = trim(t.substr(0, eq));
        std::string val = trim(t.substr(eq + 1));
        if (key.empty()) throw std::runtime_error("config: empty key in line: " + t);
        c.kv_[key] = val;
    }
    return c;
}

Config Config::from_file(const std::string &path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config: cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return from_string(ss.str());
}

std::string Config::get(const std::string &key, const std::string &def) const {
    auto it = kv_.find(key);
    return it == kv_.end() ? def : it->second;
}

double Config::get_double(const std::string &key, double def) const {
    auto it = kv_.find(key);
    return it == kv_.end() ? def : std::stod(it->second);
}

int64_t Config::get_int(const std::string &key, int64_t def) const {
    auto it = kv_.find(key);
    return it == kv_.end() ? def : std::stoll(it->second);
}

bool Config::get_bool(const std::string &key, bool def) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) return def;
    const std::string &v = it->second;
    if (v == "1" || v == "true" || v == "on" || v == "yes") return true;
    if (v == "0" || v == "false" || v == "off" || v == "no") return false;
    throw std::runtime_error("config: bad boolean for " + key + ": " + v);
}

std::vector<std::string> Config::get_list(const std::string &key) const {
    std::vector<std::string> out;
    auto it = kv_.find(key);
    if (it == kv_.end()) return out;
    std::istringstream ss(it->second);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::string t = trim(item);
        if (!t.empty()) out.push_back(t);
    }
    return out;
}

std::string Config::canonical() const {
    std::string out;
    for (const auto &[k, v] : kv_) {
        out += k;
        out += '=';
        out += v;
        out += '\n';
    }
    return out;
}

uint64_t Config::hash() const {
    const std::string c = canonical();
    return fnv1a64(c.data(), c.size());
}

uint64_t fnv1a64(const void *data, size_t len, uint64_t seed) {
    const unsigned char *p = static_cast<const unsigned char *>(data);
    uint64_t h = seed;
    for (size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

uint64_t hash_combine(uint64_t a, uint64_t b) {
    return fnv1a64(&b, sizeof(b), a ^ 0x9e3779b97f4a7c15ull);
}

} // namespace datta
