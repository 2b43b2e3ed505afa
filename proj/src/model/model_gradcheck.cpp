#include "pmn/model/model_gradcheck.hpp"

#include "pmn/common/rng.hpp"
#include "pmn/model/pmn.hpp"

namespace pmn::model {

PMNConfig tiny_config(Variant variant, AttentionMode attention) {
    PMNConfig c;
    c.labels = 4;
    c.seq_len = 20;
    c.hops = 2;
    c.conv = {{8, 9}, {8, 5}, {8, 3}};
    c.variant = variant;
    c.attention = attention;
    return c;
}

ad::GradCheckReport model_grad_check(const PMNConfig& config,
                                     const ModelGradCheckOptions& options) {
    config.validate();
    ModelParams<double> params = init_params<double>(config, options.seed);
    params.set_requires_grad(true);

    Rng data_rng(Rng::derive(options.seed, 0x9c));
    std::vector<Tensor<double>> inputs;
    std::vector<std::vector<double>> labels;
    for (std::size_t s = 0; s < options.samples; ++s) {
        Tensor<double> x({4, config.seq_len});
        for (std::size_t t = 0; t < config.seq_len; ++t) x(data_rng.below(4), t) = 1.0;
        inputs.push_back(std::move(x));
        std::vector<double> y(config.labels);
        for (auto& v : y) v = data_rng.bernoulli(0.5) ? 1.0 : 0.0;
        labels.push_back(std::move(y));
    }
    const std::uint64_t dropout_seed = Rng::derive(options.seed, 0xd0);

    auto loss = [&](bool with_gradient) {
        ad::Tape<double> tape;
        if (with_gradient) params.zero_grad();
        ad::LossEvaluation out;
        double total = 0.0;
        for (std::size_t s = 0; s < inputs.size(); ++s) {
            Rng rng(Rng::derive(dropout_seed, s));
            const ForwardOptions fo{true, &rng, false};
            const auto fwd = run_model(tape, inputs[s], params, config, fo);
            const auto& l = sample_loss(tape, fwd, std::span<const double>(labels[s]), config);
            total += l[0];
            if (with_gradient) tape.backward(l);
        }
        out.loss = total;
        out.branch_signature = tape.branch_signature();
        return out;
    };

    std::vector<ad::NamedParameter> named;
    for (auto& [name, tensor] : params.named()) named.push_back({name, tensor});
    ad::GradCheckOptions check = options.check;
    check.seed = Rng::derive(options.seed, 0x6c);
    return ad::grad_check(loss, named, check);
}

}  // namespace pmn::model
