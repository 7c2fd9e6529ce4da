// Key-value config files and the option precedence rule:
// CLI flag > environment variable > config file > built-in default.
#pragma once

#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>

namespace ramlc {

class ConfigFile {
public:
    ConfigFile() = default;

    // Lines of `key = value`; '#' starts a comment; blank lines ignored.
    static ConfigFile load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw std::runtime_error("cannot open config file " + path);
        ConfigFile cfg;
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            const auto hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            const auto trimmed = trim(line);
            if (trimmed.empty()) continue;
            const auto eq = trimmed.find('=');
            if (eq == std::string::npos)
                throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                         ": expected key = value");
            cfg.values_[trim(trimmed.substr(0, eq))] = trim(trimmed.substr(eq + 1));
        }
        return cfg;
    }

    std::optional<std::string> get(const std::string& key) const {
        auto it = values_.find(key);
        if (it == values_.end()) return std::nullopt;
        return it->second;
    }

    const std::map<std::string, std::string>& values() const { return values_; }

private:
    static std::string trim(const std::string& s) {
        const auto begin = s.find_first_not_of(" \t\r");
        if (begin == std::string::npos) return "";
        const auto end = s.find_last_not_of(" \t\r");
        return s.substr(begin, end - begin + 1);
    }

    std::map<std::string, std::string> values_;
};

// Resolves one option. `cli_set` marks an explicitly passed flag.
template <typename T>
T resolve_option(bool cli_set, T cli_value, const char* env_name, const ConfigFile& file,
                 const std::string& key, T fallback) {
    if (cli_set) return cli_value;
    if (env_name != nullptr) {
        if (const char* env = std::getenv(env_name)) {
            std::istringstream in(env);
            T out;
            in >> out;
            if (!in.fail()) return out;
        }
    }
    if (auto v = file.get(key)) {
        std::istringstream in(*v);
        T out;
        in >> out;
        if (!in.fail()) return out;
        throw std::runtime_error("config key " + key + ": cannot parse \"" + *v + "\"");
    }
    return fallback;
}

}  // namespace ramlc
