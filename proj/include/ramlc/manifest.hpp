// Run manifest written alongside every command's outputs, on success and on
// failure: the resolved configuration, input hashes, seed, artifact paths and
// wall-clock timings that make a run auditable.
#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "ramlc/serialize.hpp"

namespace ramlc {

class RunManifest {
public:
    explicit RunManifest(std::string command) : command_(std::move(command)) {
        start_ = std::chrono::steady_clock::now();
    }

    void set_config(const std::string& key, const std::string& value) { config_[key] = value; }

    template <typename T>
    void set_config_num(const std::string& key, T value) {
        config_[key] = [&] {
            std::ostringstream os;
            os << value;
            return os.str();
        }();
    }

    void set_seed(std::uint64_t seed) { seed_ = seed; }

    void add_input(const std::filesystem::path& path) {
        if (std::filesystem::exists(path))
            inputs_[path.string()] = to_hex(io::fnv1a_file(path.string()));
    }

    void add_artifact(const std::filesystem::path& path) { artifacts_.push_back(path.string()); }

    void add_timing(const std::string& stage, double seconds) { timings_[stage] = seconds; }

    void finish(const std::filesystem::path& out_path, bool success,
                const std::string& failure_reason = "") {
        nlohmann::json j;
        j["command"] = command_;
        j["status"] = success ? "success" : "failure";
        if (!success) j["failure_reason"] = failure_reason;
        j["seed"] = seed_;
        j["config"] = config_;
        j["input_hashes"] = inputs_;
        j["artifacts"] = artifacts_;
        auto timings = timings_;
        timings["total"] = std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                                         start_)
                               .count();
        j["timings_seconds"] = timings;
        std::filesystem::create_directories(out_path.parent_path().empty()
                                                ? "."
                                                : out_path.parent_path());
        std::ofstream out(out_path);
        out << j.dump(2) << "\n";
    }

private:
    static std::string to_hex(std::uint64_t v) {
        char buf[19];
        std::snprintf(buf, sizeof(buf), "0x%016llx", static_cast<unsigned long long>(v));
        return buf;
    }

    std::string command_;
    std::uint64_t seed_ = 0;
    std::map<std::string, std::string> config_;
    std::map<std::string, std::string> inputs_;
    std::vector<std::string> artifacts_;
    std::map<std::string, double> timings_;
    std::chrono::steady_clock::time_point start_;
};

}  // namespace ramlc
