#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "advray/diff.hpp"
#include "advray/image.hpp"
#include "advray/victim.hpp"

namespace advray {

// Detection-style record produced by scoring classifier crops: axis-aligned
// box in pixel coordinates (x1/y1 exclusive), winning class, and its softmax
// probability.
struct Detection {
    int x0 = 0, y0 = 0, x1 = 0, y1 = 0;
    int class_index = -1;
    std::string class_name;
    double confidence = 0;
};

struct CropBox {
    int x0, y0, x1, y1;
    bool operator==(const CropBox&) const = default;
};

// grid_n x grid_n boxes of side frame / (grid_n * (1 - overlap)), clipped to
// the frame and evenly placed, plus one full-frame box appended last. Exact
// duplicates are removed (keeping the first occurrence).
inline std::vector<CropBox> grid_crops(int frame_w, int frame_h, int grid_n, double overlap) {
    ADVRAY_CHECK(frame_w >= 1 && frame_h >= 1, "grid_crops: degenerate frame");
    ADVRAY_CHECK(grid_n >= 1, "grid_crops: grid_n must be >= 1");
    ADVRAY_CHECK(overlap >= 0 && overlap < 1, "grid_crops: overlap must be in [0, 1)");

    int bw = std::min(frame_w, std::max(1, int(std::lround(frame_w / (grid_n * (1 - overlap))))));
    int bh = std::min(frame_h, std::max(1, int(std::lround(frame_h / (grid_n * (1 - overlap))))));

    std::vector<CropBox> boxes;
    for (int gy = 0; gy < grid_n; gy++) {
        int y0 = grid_n == 1 ? 0 : int(std::lround(double(gy) * (frame_h - bh) / (grid_n - 1)));
        for (int gx = 0; gx < grid_n; gx++) {
            int x0 = grid_n == 1 ? 0 : int(std::lround(double(gx) * (frame_w - bw) / (grid_n - 1)));
            boxes.push_back({x0, y0, x0 + bw, y0 + bh});
        }
    }
    boxes.push_back({0, 0, frame_w, frame_h});

    std::vector<CropBox> unique;
    for (const CropBox& b : boxes)
        if (std::find(unique.begin(), unique.end(), b) == unique.end()) unique.push_back(b);
    return unique;
}

// Scores every crop with the classifier (bilinear-resized to the model input)
// and returns the top_k detections sorted by confidence, ties broken by crop
// order. Reporting-only: the attack itself never consumes detections.
inline std::vector<Detection> detect(const VictimModel& model, const FrameBuffer& frame,
                                     const std::vector<std::string>& classes, int grid_n,
                                     int top_k) {
    std::vector<CropBox> boxes = grid_crops(frame.width, frame.height, grid_n, 0.0);
    std::vector<Detection> dets;
    dets.reserve(boxes.size());

    for (const CropBox& b : boxes) {
        RgbGrid crop(b.x1 - b.x0, b.y1 - b.y0);
        for (int y = b.y0; y < b.y1; y++)
            for (int x = b.x0; x < b.x1; x++) crop.set(x - b.x0, y - b.y0, frame.get(x, y));
        RgbGrid resized = resize_bilinear_forward(crop, model.input_w, model.input_h);
        std::vector<double> logits = forward(model, image_to_chw(resized));

        // softmax over logits
        double m = *std::max_element(logits.begin(), logits.end());
        double sum = 0;
        for (double l : logits) sum += std::exp(l - m);
        int best = argmax(logits);

        Detection d;
        d.x0 = b.x0; d.y0 = b.y0; d.x1 = b.x1; d.y1 = b.y1;
        d.class_index = best;
        d.class_name = size_t(best) < classes.size() ? classes[best] : std::to_string(best);
        d.confidence = std::exp(logits[best] - m) / sum;
        dets.push_back(std::move(d));
    }

    std::stable_sort(dets.begin(), dets.end(),
                     [](const Detection& a, const Detection& b) { return a.confidence > b.confidence; });
    if (int(dets.size()) > top_k) dets.resize(size_t(top_k));
    return dets;
}

}  // namespace advray
