// Classifies block-occluded synthetic test images with the ridge and l1
// variants and prints the per-class residuals of the first one.

#include <cstdio>

#include "nrpose/classifier.hpp"
#include "nrpose/data.hpp"

int main() {
    using namespace nrpose;

    SyntheticSpec spec;
    spec.test_per_class = 2;
    const SyntheticDataset ds = generate_synthetic_dataset(spec);
    const OcclusionSpec occlusion{0.3, 0.0, 7};

    for (const SolverConfig& cfg : {SolverConfig::nr(), SolverConfig::l1_nr()}) {
        const PoseClassifier clf(ds.train, cfg);
        int correct = 0;
        for (std::size_t i = 0; i < ds.test.size(); ++i) {
            const ImageMatrix y = apply_block_occlusion(ds.test[i].image, occlusion, i);
            const ClassificationResult r = clf.classify(y);
            correct += r.predicted == ds.test[i].label;
            if (i == 0) {
                std::printf("%s, first image (yaw %d): %d iterations\n", to_string(cfg.mode).c_str(),
                            ds.test[i].label.degrees(), r.solve.iterations);
                for (const auto& [c, res] : r.residuals)
                    std::printf("  class %4d  residual %.4f%s\n", c.degrees(), res, c == r.predicted ? "  <-" : "");
            }
        }
        std::printf("%s: %d / %zu correct at 30%% occlusion\n\n", to_string(cfg.mode).c_str(), correct,
                    ds.test.size());
    }
}
