#include "ain/checkpoint.hpp"

#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include "ain/errors.hpp"
#include "ain/serialize.hpp"

namespace ain {

namespace fs = std::filesystem;

namespace {

std::string numbered(const char* stem, std::size_t i, const char* suffix = "") {
    std::ostringstream s;
    s << stem << '_' << std::setw(4) << std::setfill('0') << i << suffix << ".aint";
    return s.str();
}

nlohmann::json read_manifest(const fs::path& dir) {
    std::ifstream in(dir / "manifest.json");
    if (!in) throw FormatError("no manifest.json in " + dir.string());
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError((dir / "manifest.json").string() + ": " + e.what());
    }
}

}  // namespace

bool is_checkpoint(const fs::path& dir) { return fs::is_regular_file(dir / "manifest.json"); }

void save_checkpoint(const fs::path& dir, Network<float>& net, const CheckpointInfo& info,
                     Optimizer<float>* optimizer, const LrSchedule* schedule) {
    fs::create_directories(dir);
    nlohmann::json m;
    m["format"] = "ain-checkpoint";
    m["version"] = 1;
    m["network"] = to_json(net.spec());
    m["epoch"] = info.epoch;
    if (!info.extra.is_null()) m["extra"] = info.extra;

    auto& params = m["parameters"] = nlohmann::json::array();
    const auto list = net.parameters();
    for (std::size_t i = 0; i < list.size(); ++i) {
        const std::string file = numbered("param", i);
        save_tensor(dir / file, list[i].value());
        params.push_back({{"name", list[i].name()}, {"file", file}, {"shape", list[i].value().shape()}});
    }
    auto& bufs = m["buffers"] = nlohmann::json::array();
    const auto buffers = net.buffers();
    for (std::size_t i = 0; i < buffers.size(); ++i) {
        const std::string file = numbered("buffer", i);
        save_tensor(dir / file, *buffers[i].second);
        bufs.push_back({{"name", buffers[i].first}, {"file", file}});
    }

    if (optimizer) {
        nlohmann::json o{{"config", to_json(optimizer->config())}, {"steps", optimizer->steps()},
                         {"lr", optimizer->lr()}};
        auto& slots = o["slots"] = nlohmann::json::array();
        for (std::size_t i = 0; i < optimizer->first().size(); ++i) {
            nlohmann::json s{{"parameter", optimizer->params()[i].name()}, {"first", numbered("opt", i, "_a")}};
            save_tensor(dir / s["first"].get<std::string>(), optimizer->first()[i]);
            if (i < optimizer->second().size()) {
                s["second"] = numbered("opt", i, "_b");
                save_tensor(dir / s["second"].get<std::string>(), optimizer->second()[i]);
            }
            slots.push_back(std::move(s));
        }
        m["optimizer"] = std::move(o);
    }
    if (schedule) m["schedule"] = {{"config", to_json(schedule->config())}, {"state", schedule->state()}};

    // Manifest last, so a directory with a manifest is complete.
    const fs::path tmp = dir / "manifest.json.tmp";
    {
        std::ofstream out(tmp);
        if (!out) throw FormatError("cannot write " + tmp.string());
        out << m.dump(2) << '\n';
    }
    fs::rename(tmp, dir / "manifest.json");
}

LoadedCheckpoint load_checkpoint(const fs::path& dir) {
    LoadedCheckpoint out;
    out.manifest = read_manifest(dir);
    const auto& m = out.manifest;
    if (m.value("format", "") != "ain-checkpoint") throw FormatError(dir.string() + ": not a checkpoint manifest");

    try {
        NetworkSpec spec = network_spec_from_json(m.at("network"));
        out.network = std::make_unique<Network<float>>(std::move(spec));
        out.info.epoch = m.at("epoch").get<std::size_t>();
        if (m.contains("extra")) out.info.extra = m.at("extra");

        std::map<std::string, std::string> files;
        for (const auto& p : m.at("parameters")) files[p.at("name").get<std::string>()] = p.at("file").get<std::string>();
        for (auto p : out.network->parameters()) {
            auto it = files.find(p.name());
            if (it == files.end()) throw FormatError(dir.string() + ": checkpoint lacks parameter " + p.name());
            Tensor<float> v = load_tensor<float>(dir / it->second);
            if (v.shape() != p.value().shape())
                throw FormatError(dir.string() + ": parameter " + p.name() + " has shape " + to_string(v.shape()) +
                                  ", expected " + to_string(p.value().shape()));
            p.value() = std::move(v);
        }

        std::map<std::string, std::string> buffer_files;
        for (const auto& b : m.at("buffers")) buffer_files[b.at("name").get<std::string>()] = b.at("file").get<std::string>();
        for (auto& [name, tensor] : out.network->buffers()) {
            auto it = buffer_files.find(name);
            if (it == buffer_files.end()) throw FormatError(dir.string() + ": checkpoint lacks buffer " + name);
            Tensor<float> v = load_tensor<float>(dir / it->second);
            if (v.shape() != tensor->shape()) throw FormatError(dir.string() + ": buffer " + name + " has wrong shape");
            *tensor = std::move(v);
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError((dir / "manifest.json").string() + ": " + e.what());
    } catch (const ConfigError& e) {
        throw FormatError((dir / "manifest.json").string() + ": " + e.what());
    }
    return out;
}

void restore_training_state(const fs::path& dir, const nlohmann::json& manifest, Optimizer<float>& optimizer,
                            LrSchedule* schedule) {
    try {
        if (manifest.contains("optimizer")) {
            const auto& o = manifest.at("optimizer");
            const auto& slots = o.at("slots");
            if (slots.size() != optimizer.first().size())
                throw FormatError(dir.string() + ": optimizer slot count does not match the network");
            for (std::size_t i = 0; i < slots.size(); ++i) {
                const auto& s = slots[i];
                if (s.at("parameter").get<std::string>() != optimizer.params()[i].name())
                    throw FormatError(dir.string() + ": optimizer slot " + std::to_string(i) + " belongs to " +
                                      s.at("parameter").get<std::string>());
                Tensor<float> a = load_tensor<float>(dir / s.at("first").get<std::string>());
                if (a.shape() != optimizer.first()[i].shape())
                    throw FormatError(dir.string() + ": optimizer slot shape mismatch");
                optimizer.first()[i] = std::move(a);
                if (s.contains("second") && i < optimizer.second().size())
                    optimizer.second()[i] = load_tensor<float>(dir / s.at("second").get<std::string>());
            }
            optimizer.set_steps(o.at("steps").get<std::size_t>());
            optimizer.set_lr(o.at("lr").get<double>());
        }
        if (schedule && manifest.contains("schedule")) schedule->load_state(manifest.at("schedule").at("state"));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError((dir / "manifest.json").string() + ": " + e.what());
    }
}

}  // namespace ain
