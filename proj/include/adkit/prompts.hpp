#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "adkit/types.hpp"

namespace adkit {

/// State words x templates for one object category. Templates carry two "{}"
/// slots, the first for the state and the second for the object name, e.g.
/// "a photo of a {} {}.".
struct PromptEnsemble {
    std::vector<std::string> normal_states;
    std::vector<std::string> abnormal_states;
    std::vector<std::string> templates;
    std::string object_name;

    void validate() const;
};

/// 2 x C text feature matrix, row 0 = normal, row 1 = abnormal, unit rows.
struct TextFeatureMatrix {
    RowMatrixF rows;
};

class TextEncoder {
public:
    virtual ~TextEncoder() = default;
    virtual int width() const = 0;
    virtual Eigen::VectorXf encode(const std::string& sentence) const = 0;
};

/// Deterministic sentence hashing for tests and offline runs.
class SyntheticTextEncoder : public TextEncoder {
public:
    SyntheticTextEncoder(int width, uint64_t seed) : width_(width), seed_(seed) {}
    int width() const override { return width_; }
    Eigen::VectorXf encode(const std::string& sentence) const override;

private:
    int width_;
    uint64_t seed_;
};

/// Looks sentences up in an ADKH1 file with one tensor per sentence (tensor
/// name = sentence). Missing sentences raise, as encoder failures propagate.
class PrecomputedTextEncoder : public TextEncoder {
public:
    explicit PrecomputedTextEncoder(const std::string& path);
    ~PrecomputedTextEncoder() override;
    int width() const override;
    Eigen::VectorXf encode(const std::string& sentence) const override;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// Expands the ensemble into (normal sentences, abnormal sentences) in
/// state-major order: |states| * |templates| entries per class.
std::pair<std::vector<std::string>, std::vector<std::string>> render_prompts(
    const PromptEnsemble& ensemble);

/// Encodes every sentence, L2-normalizes each embedding, averages per class
/// and re-normalizes the mean.
TextFeatureMatrix encode_text_features(const std::vector<std::string>& sentences_normal,
                                       const std::vector<std::string>& sentences_abnormal,
                                       const TextEncoder& encoder);

/// Shipped CLIP ImageNet template subset filtered for anomaly detection.
std::vector<std::string> default_template_set();
std::vector<std::string> default_normal_states();
std::vector<std::string> default_abnormal_states();

/// Reads a one-entry-per-line asset file; blank lines and '#' comments skipped.
std::vector<std::string> load_prompt_lines(const std::string& path);

}  // namespace adkit
