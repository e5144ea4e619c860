#pragma once

#include <filesystem>
#include <utility>
#include <vector>

#include "oread/track_io.hpp"
#include "oread/types.hpp"

namespace oread::scene {

// Dense H x W x C array, row-major with the channel fastest. Image values
// live in [0,1]; flow fields are unbounded; disparity is assumed clipped and
// rescaled to [0,1] before it gets here.
struct ImagePlane {
    int32_t height = 0;
    int32_t width = 0;
    int32_t channels = 0;
    std::vector<double> values;

    static ImagePlane filled(int32_t h, int32_t w, int32_t c, double v);
    double& at(int32_t y, int32_t x, int32_t ch) {
        return values[(static_cast<size_t>(y) * width + x) * channels + ch];
    }
    double at(int32_t y, int32_t x, int32_t ch) const {
        return values[(static_cast<size_t>(y) * width + x) * channels + ch];
    }
    size_t count() const { return values.size(); }
    bool same_shape(const ImagePlane& o) const {
        return height == o.height && width == o.width && channels == o.channels;
    }
};

// Frame score from prediction quality: 10*log10(MSE) with the MSE floored
// at 1e-10, so a perfect prediction scores exactly -100 instead of -inf.
// Monotone increasing in MSE; higher means more anomalous.
double psnr_score(const ImagePlane& predicted, const ImagePlane& actual);

// Training-loss decomposition of the future-frame branch: squared intensity
// error (sum), absolute difference of absolute forward-difference gradients
// along both axes, smooth-L1 flow error (transition point 1), and their
// unit-weight sum.
struct FfpLosses {
    double l2 = 0.0;
    double l_grad = 0.0;
    double l_of = 0.0;
    double l_ffp = 0.0;
};

FfpLosses ffp_losses(const ImagePlane& pred_img, const ImagePlane& target_img,
                     const ImagePlane& pred_flow, const ImagePlane& target_flow);

// Reconstruction score of the scene-structure branch:
//   (lambda_d * L1(disp) + L1(flow)) + lambda_tv * (lambda_d * TV(recon_disp)
//    + TV(recon_flow))
// with anisotropic total variation on the reconstructions only.
double str_score(const ImagePlane& recon_disp, const ImagePlane& disp,
                 const ImagePlane& recon_flow, const ImagePlane& flow,
                 double lambda_d = 100.0, double lambda_tv = 0.1);

// Binary fixture container: "OIMG" magic, three uint32 dims, float64 data.
void write_plane(const std::filesystem::path& path, const ImagePlane& plane);
ImagePlane read_plane(const std::filesystem::path& path);

// Externally produced scene-expert score streams enter through the scene
// CSV; the first stream scores future-frame prediction, the second scene
// reconstruction.
inline std::pair<ScoreSeries, ScoreSeries> load_scene_scores(
    const std::filesystem::path& path) {
    return io::read_scene_scores(path);
}

} // namespace oread::scene
