#include "oread/scene.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace oread::scene {

namespace {

void require_same_shape(const ImagePlane& a, const ImagePlane& b, const char* where) {
    if (!a.same_shape(b)) throw std::invalid_argument(std::string(where) + ": shape mismatch");
    if (a.height <= 0 || a.width <= 0 || a.channels <= 0)
        throw std::invalid_argument(std::string(where) + ": empty plane");
}

double smooth_l1(double d) {
    const double a = std::abs(d);
    return a < 1.0 ? 0.5 * d * d : a - 0.5;
}

// Sum over both axes of the absolute forward differences.
double total_variation(const ImagePlane& p) {
    double tv = 0.0;
    for (int32_t y = 0; y < p.height; ++y)
        for (int32_t x = 0; x < p.width; ++x)
            for (int32_t c = 0; c < p.channels; ++c) {
                if (x + 1 < p.width) tv += std::abs(p.at(y, x + 1, c) - p.at(y, x, c));
                if (y + 1 < p.height) tv += std::abs(p.at(y + 1, x, c) - p.at(y, x, c));
            }
    return tv;
}

double l1_diff(const ImagePlane& a, const ImagePlane& b) {
    double s = 0.0;
    for (size_t i = 0; i < a.values.size(); ++i) s += std::abs(a.values[i] - b.values[i]);
    return s;
}

} // namespace

ImagePlane ImagePlane::filled(int32_t h, int32_t w, int32_t c, double v) {
    ImagePlane p;
    p.height = h;
    p.width = w;
    p.channels = c;
    p.values.assign(static_cast<size_t>(h) * w * c, v);
    return p;
}

double psnr_score(const ImagePlane& predicted, const ImagePlane& actual) {
    require_same_shape(predicted, actual, "psnr_score");
    double sse = 0.0;
    for (size_t i = 0; i < predicted.values.size(); ++i) {
        const double d = predicted.values[i] - actual.values[i];
        sse += d * d;
    }
    const double mse = std::max(sse / static_cast<double>(predicted.count()), 1e-10);
    return 10.0 * std::log10(mse);
}

FfpLosses ffp_losses(const ImagePlane& pred_img, const ImagePlane& target_img,
                     const ImagePlane& pred_flow, const ImagePlane& target_flow) {
    require_same_shape(pred_img, target_img, "ffp_losses(image)");
    require_same_shape(pred_flow, target_flow, "ffp_losses(flow)");

    FfpLosses out;
    for (size_t i = 0; i < pred_img.values.size(); ++i) {
        const double d = pred_img.values[i] - target_img.values[i];
        out.l2 += d * d;
    }
    // Gradient loss: compare the magnitudes of the forward differences.
    auto grad_term = [&](const ImagePlane& a, const ImagePlane& b) {
        double s = 0.0;
        for (int32_t y = 0; y < a.height; ++y)
            for (int32_t x = 0; x < a.width; ++x)
                for (int32_t c = 0; c < a.channels; ++c) {
                    if (x + 1 < a.width) {
                        const double ga = std::abs(a.at(y, x + 1, c) - a.at(y, x, c));
                        const double gb = std::abs(b.at(y, x + 1, c) - b.at(y, x, c));
                        s += std::abs(ga - gb);
                    }
                    if (y + 1 < a.height) {
                        const double ga = std::abs(a.at(y + 1, x, c) - a.at(y, x, c));
                        const double gb = std::abs(b.at(y + 1, x, c) - b.at(y, x, c));
                        s += std::abs(ga - gb);
                    }
                }
        return s;
    };
    out.l_grad = grad_term(pred_img, target_img);
    for (size_t i = 0; i < pred_flow.values.size(); ++i)
        out.l_of += smooth_l1(pred_flow.values[i] - target_flow.values[i]);
    out.l_ffp = out.l2 + out.l_grad + out.l_of;
    return out;
}

double str_score(const ImagePlane& recon_disp, const ImagePlane& disp,
                 const ImagePlane& recon_flow, const ImagePlane& flow,
                 double lambda_d, double lambda_tv) {
    require_same_shape(recon_disp, disp, "str_score(disp)");
    require_same_shape(recon_flow, flow, "str_score(flow)");
    const double l1 = lambda_d * l1_diff(recon_disp, disp) + l1_diff(recon_flow, flow);
    const double tv =
        lambda_d * total_variation(recon_disp) + total_variation(recon_flow);
    return l1 + lambda_tv * tv;
}

void write_plane(const std::filesystem::path& path, const ImagePlane& plane) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("write_plane: cannot open " + path.string());
    out.write("OIMG", 4);
    const uint32_t dims[3] = {static_cast<uint32_t>(plane.height),
                              static_cast<uint32_t>(plane.width),
                              static_cast<uint32_t>(plane.channels)};
    out.write(reinterpret_cast<const char*>(dims), sizeof(dims));
    out.write(reinterpret_cast<const char*>(plane.values.data()),
              static_cast<std::streamsize>(plane.values.size() * sizeof(double)));
    if (!out) throw std::runtime_error("write_plane: write failed for " + path.string());
}

ImagePlane read_plane(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("read_plane: cannot open " + path.string());
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "OIMG", 4) != 0)
        throw std::runtime_error("read_plane: bad magic in " + path.string());
    uint32_t dims[3];
    in.read(reinterpret_cast<char*>(dims), sizeof(dims));
    if (!in) throw std::runtime_error("read_plane: truncated header in " + path.string());
    ImagePlane p;
    p.height = static_cast<int32_t>(dims[0]);
    p.width = static_cast<int32_t>(dims[1]);
    p.channels = static_cast<int32_t>(dims[2]);
    const size_t n = static_cast<size_t>(dims[0]) * dims[1] * dims[2];
    p.values.resize(n);
    in.read(reinterpret_cast<char*>(p.values.data()),
            static_cast<std::streamsize>(n * sizeof(double)));
    if (!in) throw std::runtime_error("read_plane: truncated data in " + path.string());
    return p;
}

} // namespace oread::scene
