// Dataset persistence: one JSON object per line. Small shapes are inlined;
// anything above 4 KB serialized goes to a sidecar file (GCMAP1 for cube
// maps, CSV for contours) referenced by a path relative to the dataset file.
#pragma once

#include <filesystem>

#include <json.hpp>

#include "oracle.hpp"

namespace geoshape {

constexpr int kDatasetSchemaVersion = 1;

class DatasetError : public std::runtime_error {
public:
    explicit DatasetError(const std::string& m) : std::runtime_error(m) {}
};

namespace datasetdetail {

inline nlohmann::json contour_json(const Contour2D& c) {
    nlohmann::json pts = nlohmann::json::array();
    for (const auto& p : c.points) pts.push_back({p.x, p.y});
    return pts;
}

inline Contour2D contour_from_json(const nlohmann::json& j) {
    std::vector<Vec2> pts;
    for (const auto& p : j) pts.push_back({p[0].get<double>(), p[1].get<double>()});
    return Contour2D(std::move(pts));
}

} // namespace datasetdetail

inline void save_dataset(const std::vector<SimRecord>& records, const std::string& path) {
    namespace fs = std::filesystem;
    fs::path file(path);
    fs::path dir = file.parent_path().empty() ? fs::path(".") : file.parent_path();
    fs::create_directories(dir);
    fs::path shape_dir = dir / "shapes";

    std::ofstream out(path);
    if (!out) throw DatasetError("save_dataset: cannot open " + path);
    char namebuf[64];
    for (size_t i = 0; i < records.size(); ++i) {
        const SimRecord& r = records[i];
        nlohmann::json j;
        j["schema_version"] = kDatasetSchemaVersion;
        j["seed"] = r.seed;
        j["Z"] = r.Z;
        j["Y"] = r.Y;
        if (!r.cf.empty()) j["cf"] = r.cf;
        if (!r.ue.empty()) j["ue"] = r.ue;
        j["params"] = {{"family", r.params.family}, {"values", r.params.values}};
        j["flow"] = {{"alpha", r.flow.alpha},
                     {"v_hat", {r.flow.v_hat.x, r.flow.v_hat.y, r.flow.v_hat.z}},
                     {"reynolds", r.flow.reynolds}};
        if (r.is_contour()) {
            j["kind"] = "contour";
            j["lift"] = r.lift;
            nlohmann::json inline_shape = datasetdetail::contour_json(r.contour());
            if (inline_shape.dump().size() <= 4096) {
                j["shape"] = inline_shape;
            } else {
                fs::create_directories(shape_dir);
                std::snprintf(namebuf, sizeof namebuf, "rec_%06zu.csv", i);
                save_contour_csv(r.contour(), (shape_dir / namebuf).string());
                j["shape_ref"] = std::string("shapes/") + namebuf;
            }
        } else {
            j["kind"] = "cubemap";
            fs::create_directories(shape_dir);
            std::snprintf(namebuf, sizeof namebuf, "rec_%06zu.gcmap", i);
            save_gcmap(r.cubemap(), (shape_dir / namebuf).string());
            j["shape_ref"] = std::string("shapes/") + namebuf;
        }
        out << j.dump() << "\n";
    }
}

inline std::vector<SimRecord> load_dataset(const std::string& path) {
    namespace fs = std::filesystem;
    std::ifstream in(path);
    if (!in) throw DatasetError("load_dataset: cannot open " + path);
    fs::path dir = fs::path(path).parent_path();
    if (dir.empty()) dir = ".";
    std::vector<SimRecord> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line);
        int ver = j.at("schema_version").get<int>();
        if (ver / 100 != kDatasetSchemaVersion / 100 && ver != kDatasetSchemaVersion)
            throw DatasetError("load_dataset: unsupported schema version " + std::to_string(ver));
        SimRecord r;
        r.seed = j.at("seed").get<uint64_t>();
        r.Z = j.at("Z").get<double>();
        r.Y = j.at("Y").get<std::vector<double>>();
        if (j.contains("cf")) r.cf = j["cf"].get<std::vector<double>>();
        if (j.contains("ue")) r.ue = j["ue"].get<std::vector<double>>();
        r.params.family = j.at("params").at("family").get<std::string>();
        r.params.values = j.at("params").at("values").get<std::vector<double>>();
        r.flow.alpha = j.at("flow").at("alpha").get<double>();
        r.flow.reynolds = j.at("flow").at("reynolds").get<double>();
        auto vh = j.at("flow").at("v_hat");
        r.flow.v_hat = {vh[0].get<double>(), vh[1].get<double>(), vh[2].get<double>()};
        std::string kind = j.at("kind").get<std::string>();
        if (kind == "contour") {
            r.lift = j.at("lift").get<double>();
            if (j.contains("shape"))
                r.shape = datasetdetail::contour_from_json(j["shape"]);
            else
                r.shape = load_contour_csv((dir / j.at("shape_ref").get<std::string>()).string());
        } else if (kind == "cubemap") {
            r.shape = load_gcmap((dir / j.at("shape_ref").get<std::string>()).string());
        } else {
            throw DatasetError("load_dataset: unknown shape kind '" + kind + "'");
        }
        out.push_back(std::move(r));
    }
    return out;
}

} // namespace geoshape
