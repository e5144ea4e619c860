#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "oread/nn.hpp"

namespace oread::nn {

namespace {

constexpr const char* kFormatTag = "oread-weights";
constexpr int kFormatVersion = 1;

std::string hex64(uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

} // namespace

void save_weights(const ParamStore& ps, const std::filesystem::path& path) {
    nlohmann::json root;
    root["format"] = kFormatTag;
    root["version"] = kFormatVersion;
    nlohmann::json arrays = nlohmann::json::object();
    for (const auto& [name, e] : ps.entries()) {
        nlohmann::json arr;
        arr["rows"] = e.value.rows();
        arr["cols"] = e.value.cols();
        std::vector<double> data;
        data.reserve(static_cast<size_t>(e.value.size()));
        for (Eigen::Index r = 0; r < e.value.rows(); ++r)
            for (Eigen::Index c = 0; c < e.value.cols(); ++c)
                data.push_back(e.value(r, c));
        arr["data"] = std::move(data);
        arrays[name] = std::move(arr);
    }
    root["arrays"] = std::move(arrays);
    root["checksum"] = hex64(ps.checksum());

    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_weights: cannot open " + path.string());
    out << root.dump(1) << "\n";
    if (!out) throw std::runtime_error("save_weights: write failed for " + path.string());
}

void load_weights(const std::filesystem::path& path, ParamStore& ps) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_weights: cannot open " + path.string());
    nlohmann::json root;
    in >> root;

    if (root.value("format", "") != kFormatTag)
        throw std::runtime_error("load_weights: not a weight container: " + path.string());
    if (root.value("version", -1) != kFormatVersion)
        throw std::runtime_error("load_weights: unsupported container version in " +
                                 path.string());
    const auto& arrays = root.at("arrays");
    if (arrays.size() != ps.entries().size())
        throw std::runtime_error("load_weights: array set mismatch in " + path.string());

    for (auto& [name, e] : ps.entries()) {
        if (!arrays.contains(name))
            throw std::runtime_error("load_weights: missing array " + name);
        const auto& arr = arrays.at(name);
        const auto rows = arr.at("rows").get<Eigen::Index>();
        const auto cols = arr.at("cols").get<Eigen::Index>();
        if (rows != e.value.rows() || cols != e.value.cols())
            throw std::runtime_error("load_weights: shape mismatch for " + name);
        const auto data = arr.at("data").get<std::vector<double>>();
        if (static_cast<Eigen::Index>(data.size()) != rows * cols)
            throw std::runtime_error("load_weights: bad data length for " + name);
        size_t k = 0;
        for (Eigen::Index r = 0; r < rows; ++r)
            for (Eigen::Index c = 0; c < cols; ++c) e.value(r, c) = data[k++];
    }

    const std::string expect = root.value("checksum", "");
    if (expect != hex64(ps.checksum()))
        throw std::runtime_error("load_weights: checksum mismatch in " + path.string());
}

} // namespace oread::nn
