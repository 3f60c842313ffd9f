#include "xensemble.h"

#include <algorithm>
#include <exception>
#include <string>

#include "xens/error.hpp"
#include "xens/harness.hpp"
#include "xens/model.hpp"
#include "xens/tensor.hpp"

namespace {

thread_local std::string g_last_error;

xe_status fail(xe_status s, const std::string& msg) {
    g_last_error = msg;
    return s;
}

// Translates the in-flight exception; call from a catch block only.
xe_status from_exception() {
    try {
        throw;
    } catch (const xens::Error& e) {
        return fail(e.kind() == xens::ErrorKind::Config ? XE_ERR_CONFIG : XE_ERR_DATA,
                    e.what());
    } catch (const std::exception& e) {
        return fail(XE_ERR_INTERNAL, e.what());
    } catch (...) {
        return fail(XE_ERR_INTERNAL, "unknown error");
    }
}

}  // namespace

struct xe_model {
    xens::MicroModel impl;
};

extern "C" {

const char* xe_version(void) { return "1.0.0"; }

const char* xe_last_error(void) { return g_last_error.c_str(); }

xe_status xe_run(const xe_run_options* options) {
    if (!options || !options->command || !options->out_dir)
        return fail(XE_ERR_ARG, "xe_run: options with command and out_dir are required");
    try {
        xens::RunOptions opt;
        opt.command = options->command;
        if (options->config_path) opt.config_path = options->config_path;
        opt.out_dir = options->out_dir;
        if (options->format) opt.format = options->format;
        if (options->has_seed) opt.seed = options->seed;
        if (options->workers > 0) opt.workers = options->workers;
        opt.quiet = options->quiet != 0;
        xens::run_command(opt);
        g_last_error.clear();
        return XE_OK;
    } catch (...) {
        return from_exception();
    }
}

xe_status xe_model_load(const char* path, xe_model** out) {
    if (!path || !out) return fail(XE_ERR_ARG, "xe_model_load: null argument");
    *out = nullptr;
    try {
        *out = new xe_model{xens::MicroModel::load(path)};
        g_last_error.clear();
        return XE_OK;
    } catch (...) {
        return from_exception();
    }
}

void xe_model_free(xe_model* model) { delete model; }

int xe_model_input_dim(const xe_model* model) {
    return model ? int(model->impl.input_dim()) : -1;
}

int xe_model_num_classes(const xe_model* model) {
    return model ? int(model->impl.num_classes()) : -1;
}

xe_status xe_model_predict(const xe_model* model, const double* pixels, size_t n,
                           double* probs, int* label) {
    if (!model || !pixels) return fail(XE_ERR_ARG, "xe_model_predict: null argument");
    if (n != model->impl.input_dim())
        return fail(XE_ERR_ARG, "xe_model_predict: expected " +
                                    std::to_string(model->impl.input_dim()) +
                                    " pixels, got " + std::to_string(n));
    try {
        xens::Tensor x;
        x.shape = {n};
        x.data.assign(pixels, pixels + n);
        const xens::PredictionVector pv = model->impl.forward(x);
        if (probs) std::copy(pv.probs.begin(), pv.probs.end(), probs);
        if (label) *label = pv.label;
        g_last_error.clear();
        return XE_OK;
    } catch (...) {
        return from_exception();
    }
}

}  // extern "C"
