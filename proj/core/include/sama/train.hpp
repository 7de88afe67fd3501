#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "sama/dit.hpp"
#include "sama/pretext.hpp"
#include "sama/scene.hpp"
#include "sama/tensor.hpp"

namespace sama {

struct TrainConfig {
    double lr = 2e-5;
    double lambda_sem = 0.1;
    double ema_decay = 0.9998;
    bool ema = true;  // shadow updates never influence gradients
    int batch_size = 4;
    int steps = 200;
    int stage = 0;
    bool sa = true;  // semantic anchoring objective
    bool ma = true;  // motion-alignment pretext transforms (stage 0 video items)
    std::string optimizer = "sgd";  // "sgd" | "adam"
    double t2v_fraction = 0.5;      // stage-0 share of text-to-video items
    double image_fraction = 0.1;    // stage-1 share of image-edit items
    double cube_ratio = 0.3;
    std::uint64_t seed = 0;
    int checkpoint_every = 0;  // 0 = final checkpoint only

    void validate() const;
};

// One schedulable training example, already past any pretext transform.
struct BatchSample {
    VideoClip source;
    VideoClip target;
    std::string prompt;
    bool is_image = false;
    PretextTask task = PretextTask::None;
};

// In-memory corpus resolved from a manifest; records filtered out by the
// judge (keep == false) are dropped at load time.
struct Corpus {
    struct PairItem {
        std::string id;
        VideoClip source;
        VideoClip target;
        std::string instruction;
        std::string edit_kind;
        std::vector<std::uint8_t> region;
    };
    struct ClipItem {
        std::string id;
        VideoClip clip;
        std::string caption;
    };
    std::vector<PairItem> image_edits;
    std::vector<PairItem> video_edits;
    std::vector<ClipItem> t2v;
};

Corpus load_corpus(const std::filesystem::path& manifest_path);

// Draws one batch for the requested stage. Stage 0 mixes image-edit pairs
// with text-to-video items run through the pretext sampler; stage 1 draws
// video-edit triplets with a small image-edit fraction and no pretext tasks.
std::vector<BatchSample> stage_batch(int stage, const Corpus& corpus, const TrainConfig& cfg,
                                     Rng& rng);

// --- flow-matching pieces ---------------------------------------------------

// x_t = t*x1 + (1-t)*x0.
Tensor interpolate(const Tensor& x0, const Tensor& x1, float t);

// Mean squared error between the prediction and the velocity x1 - x0,
// averaged over the supervised positions.
Tensor fm_loss(const Tensor& v_pred, const Tensor& x1, const Tensor& x0);

// Mean absolute error between anchor tokens and head predictions.
Tensor sem_loss(const Tensor& anchor_tokens, const Tensor& predicted);

// fm + lambda * sem.
Tensor total_loss(const Tensor& fm, const Tensor& sem, float lambda_sem);

// Assembled inputs plus supervision targets for one sample. A single t noises
// the semantic and target segments jointly.
struct TrainItem {
    AssembledSequence seq;
    float t = 0.0f;
    std::vector<int> instruction_ids;
    Tensor x0;  // noise leaf over [semantic ; target] rows
    Tensor x1;  // detached clean tokens, same rows
    std::optional<Tensor> sem_target;  // detached anchor tokens
};

TrainItem build_train_item(const BatchSample& sample, const DiTModel& model, bool sa, bool ma,
                           Rng& rng);

// --- optimizer / EMA ----------------------------------------------------------

struct EmaState {
    std::vector<std::string> names;
    std::vector<std::vector<float>> shadow;

    static EmaState from(ModelParams& params);
    void update(ModelParams& params, double decay);
    // Writes shadow values into the given parameter set (for EMA evaluation).
    void apply_to(ModelParams& params) const;
};

struct AdamState {
    std::vector<std::vector<float>> m, v;
    std::int64_t t = 0;

    static AdamState from(ModelParams& params);
};

struct TrainState {
    DiTModel model;
    TrainConfig config;
    EmaState ema;
    AdamState adam;
    std::int64_t step = 0;

    static TrainState init(DiTModel model, TrainConfig config);
};

struct StepLosses {
    double fm = 0.0;
    double sem = 0.0;
    double total = 0.0;
};

// forward -> total_loss -> backward -> descent update -> EMA shadow update.
// Throws TrainingError (with the step index) on non-finite losses.
StepLosses train_step(TrainState& state, const std::vector<BatchSample>& batch);

// CSV training log: step,fm_loss,sem_loss,total,wall_ms.
struct TrainLogRow {
    std::int64_t step = 0;
    double fm = 0.0;
    double sem = 0.0;
    double total = 0.0;
    double wall_ms = 0.0;
};

void write_train_log(const std::filesystem::path& path, const std::vector<TrainLogRow>& rows);
std::vector<TrainLogRow> read_train_log(const std::filesystem::path& path);

}  // namespace sama
