#include "neuroexc/narx.hpp"

#include <cmath>
#include <random>
#include <sstream>

#include "neuroexc/errors.hpp"
#include "neuroexc/keyvalue.hpp"
#include "neuroexc/numeric_io.hpp"

namespace neuroexc {

Mlp Mlp::zeros(int hidden, int inputs) {
    if (hidden < 1 || inputs < 1) throw ConfigError("mlp: hidden and input sizes must be >= 1");
    Mlp net;
    net.hidden_w = Eigen::MatrixXd::Zero(hidden, inputs);
    net.hidden_b = Eigen::VectorXd::Zero(hidden);
    net.out_w = Eigen::VectorXd::Zero(hidden);
    return net;
}

void Mlp::check() const {
    if (hidden_w.rows() < 1 || hidden_w.cols() < 1 || hidden_b.size() != hidden_w.rows() ||
        out_w.size() != hidden_w.rows()) {
        throw ConfigError("mlp: inconsistent layer shapes");
    }
}

void NarxModel::check() const {
    f.check();
    g.check();
    if (f.inputs() != g.inputs()) throw ConfigError("narx: f and g take different input sizes");
}

double mlp_forward(const Mlp& net, const Eigen::Ref<const Eigen::VectorXd>& z) {
    if (z.size() != net.inputs()) throw ConfigError("mlp_forward: input size mismatch");
    const Eigen::VectorXd pre = net.hidden_w * z + net.hidden_b;
    return net.out_w.dot(pre.array().tanh().matrix()) + net.out_b;
}

double narx_predict(const NarxModel& model, const Eigen::Ref<const Eigen::VectorXd>& z, double u) {
    return mlp_forward(model.f, z) + mlp_forward(model.g, z) * u;
}

void mlp_gradient(const Mlp& net, const Eigen::Ref<const Eigen::VectorXd>& z, double scale,
                  Eigen::Ref<Eigen::VectorXd> grad) {
    const int h = net.hidden();
    const int n = net.inputs();
    if (z.size() != n || grad.size() != net.parameter_count()) {
        throw ConfigError("mlp_gradient: size mismatch");
    }
    const Eigen::ArrayXd act = (net.hidden_w * z + net.hidden_b).array().tanh();
    const Eigen::ArrayXd dpre = scale * net.out_w.array() * (1.0 - act.square());
    for (int i = 0; i < h; ++i) grad.segment(i * n, n) = dpre(i) * z;
    grad.segment(h * n, h) = dpre.matrix();
    grad.segment(h * n + h, h) = scale * act.matrix();
    grad(h * n + 2 * h) = scale;
}

Eigen::VectorXd weight_jacobian(const NarxModel& model, const Eigen::Ref<const Eigen::VectorXd>& z, double u) {
    const int nf = model.f.parameter_count();
    Eigen::VectorXd grad(model.parameter_count());
    mlp_gradient(model.f, z, 1.0, grad.head(nf));
    mlp_gradient(model.g, z, u, grad.tail(model.g.parameter_count()));
    return grad;
}

namespace {

void write_net(const Mlp& net, Eigen::Ref<Eigen::VectorXd> out) {
    const int h = net.hidden();
    const int n = net.inputs();
    for (int i = 0; i < h; ++i) out.segment(i * n, n) = net.hidden_w.row(i).transpose();
    out.segment(h * n, h) = net.hidden_b;
    out.segment(h * n + h, h) = net.out_w;
    out(h * n + 2 * h) = net.out_b;
}

Mlp read_net(const Eigen::Ref<const Eigen::VectorXd>& in, int h, int n) {
    Mlp net = Mlp::zeros(h, n);
    for (int i = 0; i < h; ++i) net.hidden_w.row(i) = in.segment(i * n, n).transpose();
    net.hidden_b = in.segment(h * n, h);
    net.out_w = in.segment(h * n + h, h);
    net.out_b = in(h * n + 2 * h);
    return net;
}

}  // namespace

Eigen::VectorXd flatten(const NarxModel& model) {
    model.check();
    const int nf = model.f.parameter_count();
    Eigen::VectorXd theta(model.parameter_count());
    write_net(model.f, theta.head(nf));
    write_net(model.g, theta.tail(model.g.parameter_count()));
    return theta;
}

NarxModel unflatten(const Eigen::Ref<const Eigen::VectorXd>& theta, int p, int q, int inputs) {
    if (p < 1 || q < 1 || inputs < 1) throw ConfigError("unflatten: sizes must be >= 1");
    const int nf = p * inputs + 2 * p + 1;
    const int ng = q * inputs + 2 * q + 1;
    if (theta.size() != nf + ng) {
        throw ConfigError("unflatten: expected " + std::to_string(nf + ng) + " parameters, got " +
                          std::to_string(theta.size()));
    }
    return NarxModel{read_net(theta.head(nf), p, inputs), read_net(theta.tail(ng), q, inputs)};
}

NarxModel random_model(int p, int q, std::uint64_t seed, int inputs) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-0.5, 0.5);
    const int count = (p * inputs + 2 * p + 1) + (q * inputs + 2 * q + 1);
    Eigen::VectorXd theta(count);
    for (int i = 0; i < count; ++i) theta(i) = dist(rng);
    return unflatten(theta, p, q, inputs);
}

double mse_cost(const NarxModel& model, const Dataset& data) {
    if (data.empty()) throw ConfigError("mse_cost: empty dataset");
    double sum = 0.0;
    for (const auto& r : data.records) {
        const double e = r.y_next - narx_predict(model, r.z, r.u);
        sum += e * e;
    }
    return sum / (2.0 * static_cast<double>(data.size()));
}

std::string format_weights(const NarxModel& model) {
    const Eigen::VectorXd theta = flatten(model);
    std::string out = "narx-v1 p=" + std::to_string(model.f.hidden()) + " in=" + std::to_string(model.f.inputs());
    if (model.g.hidden() != model.f.hidden()) out += " q=" + std::to_string(model.g.hidden());
    out += '\n';
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
        out += format_double(theta(i));
        out += '\n';
    }
    return out;
}

NarxModel parse_weights(std::string_view text) {
    std::istringstream in{std::string(text)};
    std::string header;
    if (!std::getline(in, header)) throw ConfigError("weights: empty file");
    const auto fields = split_whitespace(header);
    if (fields.empty() || fields[0] != "narx-v1") throw ConfigError("weights: missing 'narx-v1' header");

    long p = -1;
    long q = -1;
    long inputs = -1;
    for (std::size_t i = 1; i < fields.size(); ++i) {
        const auto eq = fields[i].find('=');
        if (eq == std::string::npos) throw ConfigError("weights: malformed header field '" + fields[i] + "'");
        const std::string key = fields[i].substr(0, eq);
        const long value = parse_int(std::string_view(fields[i]).substr(eq + 1));
        if (key == "p") p = value;
        else if (key == "q") q = value;
        else if (key == "in") inputs = value;
        else throw ConfigError("weights: unknown header field '" + key + "'");
    }
    if (p < 1 || inputs < 1) throw ConfigError("weights: header needs p and in");
    if (q < 0) q = p;

    std::vector<double> values;
    std::string line;
    while (std::getline(in, line)) {
        const auto tokens = split_whitespace(line);
        if (tokens.empty()) continue;
        if (tokens.size() != 1) throw ConfigError("weights: expected one value per line");
        values.push_back(parse_double(tokens[0]));
    }
    const Eigen::Map<const Eigen::VectorXd> theta(values.data(), static_cast<Eigen::Index>(values.size()));
    return unflatten(theta, static_cast<int>(p), static_cast<int>(q), static_cast<int>(inputs));
}

void save_weights(const NarxModel& model, const std::filesystem::path& path) {
    write_text_atomic(path, format_weights(model));
}

NarxModel load_weights(const std::filesystem::path& path) { return parse_weights(read_text(path)); }

}  // namespace neuroexc
