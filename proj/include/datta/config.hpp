#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace datta {

// Flat key=value run configuration. Keys are dotted section paths mirroring
// the module configs ("train.alpha", "augment.rng_seed", ...). Lines starting
// with '#' are comments.
class Config {
public:
    Config() = default;

    static Config from_string(const std::string &text);
    static Config from_file(const std::string &path);

    bool has(const std::string &key) const { return kv_.count(key) > 0; }
    std::string get(const std::string &key, const std::string &def) const;
    double get_double(const std::string &key, double def) const;
    int64_t get_int(const std::string &key, int64_t def) const;
    bool get_bool(const std::string &key, bool def) const;
    std::vector<std::string> get_list(const std::string &key) const; // comma separated

    void set(const std::string &key, const std::string &value) { kv_[key] = value; }

    // Sorted "key=value" lines; the canonical form that gets hashed.
    std::string canonical() const;
    uint64_t hash() const;

    const std::map<std::string, std::string> &entries() const { return kv_; }

private:
    std::map<std::string, std::string> kv_;
};

uint64_t fnv1a64(const void *data, size_t len, uint64_t seed = 0xcbf29ce484222325ull);
uint64_t hash_combine(uint64_t a, uint64_t b);

} // namespace datta
