#pragma once

#include <array>

#include "ad2/baselines.hpp"
#include "ad2/datakit.hpp"
#include "ad2/detector.hpp"

namespace ad2::methods {

using dataset::LabeledPair;

class Ad2Method : public datakit::Method {
public:
    explicit Ad2Method(detector::Ad2Model& model) : model_(&model) {}
    const char* name() const override { return "ad2"; }
    int classify(const LabeledPair& p) override {
        return static_cast<int>(model_->classify(p).second);
    }
    std::array<double, 4> class_scores(const LabeledPair& p) override {
        return model_->posterior(p);
    }
    long param_count() const override { return model_->param_count(); }

private:
    detector::Ad2Model* model_;
};

class DiffNetMethod : public datakit::Method {
public:
    explicit DiffNetMethod(baselines::DiffNetModel& model) : model_(&model) {}
    const char* name() const override { return "diffnet"; }
    int classify(const LabeledPair& p) override { return model_->classify(p); }
    std::array<double, 4> class_scores(const LabeledPair& p) override {
        return model_->posterior(p);
    }
    long param_count() const override { return model_->param_count(); }

private:
    baselines::DiffNetModel* model_;
};

class Lap4Method : public datakit::Method {
public:
    explicit Lap4Method(const baselines::Lap4Model& model) : model_(&model) {}
    const char* name() const override { return "lap4"; }
    int classify(const LabeledPair& p) override { return model_->classify(p); }
    std::array<double, 4> class_scores(const LabeledPair& p) override {
        return model_->class_scores(p);
    }

private:
    const baselines::Lap4Model* model_;
};

class KpcaMethod : public datakit::Method {
public:
    explicit KpcaMethod(baselines::KpcaModel& model) : model_(&model) {}
    const char* name() const override {
        return model_->variant == baselines::KpcaVariant::cop ? "cop" : "corp";
    }
    int classify(const LabeledPair& p) override { return model_->classify(p); }
    std::array<double, 4> class_scores(const LabeledPair& p) override {
        return model_->class_scores(p);
    }

private:
    baselines::KpcaModel* model_;
};

}  // namespace ad2::methods
