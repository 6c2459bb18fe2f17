#include "adkit/prompts.hpp"

#include <fstream>
#include <map>
#include <stdexcept>

#include "adkit/checkpoint.hpp"
#include "adkit/rng.hpp"

namespace adkit {

namespace {

int count_slots(const std::string& tmpl) {
    int n = 0;
    for (size_t i = 0; i + 1 < tmpl.size(); ++i)
        if (tmpl[i] == '{' && tmpl[i + 1] == '}') ++n;
    return n;
}

std::string fill_slots(const std::string& tmpl, const std::string& state,
                       const std::string& object) {
    std::string out = tmpl;
    size_t p = out.find("{}");
    out.replace(p, 2, state);
    p = out.find("{}", p + state.size());
    out.replace(p, 2, object);
    return out;
}

}  // namespace

void PromptEnsemble::validate() const {
    if (normal_states.empty() || abnormal_states.empty() || templates.empty())
        throw std::invalid_argument("prompt ensemble: state and template lists must be non-empty");
    if (object_name.empty())
        throw std::invalid_argument("prompt ensemble: object name must be non-empty");
    for (const auto& t : templates)
        if (count_slots(t) != 2)
            throw std::invalid_argument(
                "prompt ensemble: template needs exactly one state and one object slot: '" + t +
                "'");
}

std::pair<std::vector<std::string>, std::vector<std::string>> render_prompts(
    const PromptEnsemble& ensemble) {
    ensemble.validate();
    auto render_side = [&](const std::vector<std::string>& states) {
        std::vector<std::string> out;
        out.reserve(states.size() * ensemble.templates.size());
        for (const auto& state : states)
            for (const auto& tmpl : ensemble.templates)
                out.push_back(fill_slots(tmpl, state, ensemble.object_name));
        return out;
    };
    return {render_side(ensemble.normal_states), render_side(ensemble.abnormal_states)};
}

Eigen::VectorXf SyntheticTextEncoder::encode(const std::string& sentence) const {
    Rng rng(hash_combine(fnv1a64(sentence.data(), sentence.size()), seed_));
    Eigen::VectorXf v(width_);
    for (int i = 0; i < width_; ++i) v[i] = static_cast<float>(rng.next_gaussian());
    return v;
}

struct PrecomputedTextEncoder::Impl {
    TensorFileReader reader;
    int width;
    explicit Impl(const std::string& path) : reader(path), width(0) {
        const auto names = reader.names();
        if (names.empty())
            throw std::runtime_error("text encoder file has no sentences: " + path);
        width = static_cast<int>(reader.info(names.front()).shape.back());
    }
};

PrecomputedTextEncoder::PrecomputedTextEncoder(const std::string& path)
    : impl_(std::make_unique<Impl>(path)) {}
PrecomputedTextEncoder::~PrecomputedTextEncoder() = default;

int PrecomputedTextEncoder::width() const { return impl_->width; }

Eigen::VectorXf PrecomputedTextEncoder::encode(const std::string& sentence) const {
    if (!impl_->reader.has(sentence))
        throw std::runtime_error("text encoder: no embedding for sentence '" + sentence + "'");
    std::vector<float> data = impl_->reader.read(sentence);
    return Eigen::Map<const Eigen::VectorXf>(data.data(),
                                             static_cast<Eigen::Index>(data.size()));
}

TextFeatureMatrix encode_text_features(const std::vector<std::string>& sentences_normal,
                                       const std::vector<std::string>& sentences_abnormal,
                                       const TextEncoder& encoder) {
    if (sentences_normal.empty() || sentences_abnormal.empty())
        throw std::invalid_argument("encode_text_features: sentence lists must be non-empty");
    const int width = encoder.width();

    auto encode_class = [&](const std::vector<std::string>& sentences) {
        Eigen::VectorXd mean = Eigen::VectorXd::Zero(width);
        for (const auto& s : sentences) {
            Eigen::VectorXd e = encoder.encode(s).cast<double>();
            const double norm = e.norm();
            if (!(norm > 0.0))
                throw std::runtime_error("encode_text_features: zero embedding for '" + s + "'");
            mean += e / norm;
        }
        mean /= static_cast<double>(sentences.size());
        const double norm = mean.norm();
        if (!(norm > 0.0))
            throw std::runtime_error("encode_text_features: class mean collapsed to zero");
        return (mean / norm).cast<float>().eval();
    };

    TextFeatureMatrix ft;
    ft.rows.resize(2, width);
    ft.rows.row(0) = encode_class(sentences_normal).transpose();
    ft.rows.row(1) = encode_class(sentences_abnormal).transpose();
    return ft;
}

namespace {

// CLIP ImageNet photo-style templates, with rendering/artwork variants and
// state-bearing ones ("weird", "clean", "dirty", "nice") dropped, plus the
// scene phrasings. Two slots each: state first, then object.
const std::vector<std::string>& template_asset() {
    static const std::vector<std::string> kTemplates = {
        "a bad photo of a {} {}.",
        "a low resolution photo of the {} {}.",
        "a bad photo of the {} {}.",
        "a cropped photo of the {} {}.",
        "a bright photo of a {} {}.",
        "a dark photo of the {} {}.",
        "a photo of my {} {}.",
        "a photo of the cool {} {}.",
        "a close-up photo of a {} {}.",
        "a black and white photo of the {} {}.",
        "a bright photo of the {} {}.",
        "a cropped photo of a {} {}.",
        "a jpeg corrupted photo of a {} {}.",
        "a blurry photo of the {} {}.",
        "a photo of the {} {}.",
        "a good photo of the {} {}.",
        "a photo of one {} {}.",
        "a close-up photo of the {} {}.",
        "a photo of a {} {}.",
        "a low resolution photo of a {} {}.",
        "a photo of a large {} {}.",
        "a blurry photo of a {} {}.",
        "a jpeg corrupted photo of the {} {}.",
        "a good photo of a {} {}.",
        "a photo of the small {} {}.",
        "a photo of the large {} {}.",
        "a black and white photo of a {} {}.",
        "a dark photo of a {} {}.",
        "a photo of a cool {} {}.",
        "a photo of a small {} {}.",
        "there is a {} {} in the scene.",
        "there is the {} {} in the scene.",
        "this is a {} {} in the scene.",
        "this is the {} {} in the scene.",
        "this is one {} {} in the scene.",
    };
    return kTemplates;
}

}  // namespace

std::vector<std::string> default_template_set() { return template_asset(); }

std::vector<std::string> default_normal_states() {
    return {"flawless", "perfect", "unblemished", "without defect"};
}

std::vector<std::string> default_abnormal_states() {
    return {"damaged", "broken", "with flaw", "with defect"};
}

std::vector<std::string> load_prompt_lines(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open prompt asset: " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        line = line.substr(first, line.find_last_not_of(" \t\r") - first + 1);
        if (line[0] == '#') continue;
        lines.push_back(line);
    }
    return lines;
}

}  // namespace adkit
