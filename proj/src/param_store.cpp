#include "rasap/param_store.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace rasap {

namespace {

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace

std::mt19937_64 ParamStore::rng_for(const std::string& name) const {
  return std::mt19937_64(seed_ ^ fnv1a(name));
}

ag::Var ParamStore::insert(const std::string& name, Tensor t) {
  if (params_.count(name))
    throw std::logic_error("ParamStore: duplicate parameter name '" + name + "'");
  auto v = ag::leaf(std::move(t), true);
  params_[name] = v;
  return v;
}

ag::Var ParamStore::make_matrix(const std::string& name, int rows, int cols) {
  Tensor t({rows, cols});
  const double a = std::sqrt(6.0 / (rows + cols));
  auto rng = rng_for(name);
  std::uniform_real_distribution<double> unif(-a, a);
  for (double& v : t.data) v = unif(rng);
  return insert(name, std::move(t));
}

ag::Var ParamStore::make_embedding(const std::string& name, int rows, int cols) {
  Tensor t({rows, cols});
  auto rng = rng_for(name);
  std::normal_distribution<double> norm(0.0, 0.02);
  for (double& v : t.data) v = norm(rng);
  return insert(name, std::move(t));
}

ag::Var ParamStore::make_zeros(const std::string& name, int rows, int cols) {
  return insert(name, Tensor({rows, cols}, 0.0));
}

ag::Var ParamStore::make_ones(const std::string& name, int rows, int cols) {
  return insert(name, Tensor({rows, cols}, 1.0));
}

ag::Var ParamStore::get(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw std::out_of_range("ParamStore: unknown parameter '" + name + "'");
  return it->second;
}

void ParamStore::zero_grad() {
  for (auto& [name, var] : params_) {
    (void)name;
    if (var->grad.shape == var->value.shape)
      std::fill(var->grad.data.begin(), var->grad.data.end(), 0.0);
  }
}

std::string ParamStore::meta_or(const std::string& key, const std::string& fallback) const {
  auto it = meta_.find(key);
  return it == meta_.end() ? fallback : it->second;
}

void ParamStore::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  out << "rasap-checkpoint 1\n";
  out << "seed " << seed_ << "\n";
  for (const auto& [key, value] : meta_) out << "meta " << key << " " << value << "\n";
  char buf[40];
  for (const auto& [name, var] : params_) {
    out << "param " << name << " " << var->value.ndim();
    for (int d : var->value.shape) out << " " << d;
    out << "\n";
    for (std::size_t i = 0; i < var->value.data.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%a", var->value.data[i]);
      out << buf << (i + 1 == var->value.data.size() ? "\n" : " ");
    }
  }
  if (!out) throw std::runtime_error("write failure on checkpoint: " + path);
}

ParamStore ParamStore::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  std::string magic;
  int version = 0;
  in >> magic >> version;
  if (magic != "rasap-checkpoint" || version != 1)
    throw std::runtime_error("not a checkpoint file: " + path);
  std::string tag;
  in >> tag;
  if (tag != "seed") throw std::runtime_error("malformed checkpoint (missing seed): " + path);
  std::uint64_t seed = 0;
  in >> seed;
  ParamStore store(seed);
  while (in >> tag) {
    if (tag == "meta") {
      std::string key, value;
      in >> key;
      std::getline(in, value);
      if (!value.empty() && value[0] == ' ') value.erase(0, 1);
      store.meta_[key] = value;
    } else if (tag == "param") {
      std::string name;
      int ndim = 0;
      in >> name >> ndim;
      std::vector<int> shape(ndim);
      for (int& d : shape) in >> d;
      Tensor t(shape);
      for (double& v : t.data) {
        std::string tok;
        in >> tok;
        v = std::strtod(tok.c_str(), nullptr);
      }
      store.insert(name, std::move(t));
    } else {
      throw std::runtime_error("malformed checkpoint line tag '" + tag + "' in " + path);
    }
  }
  return store;
}

double grad_check(const std::function<ag::Var()>& f, ParamStore& params, double eps,
                  int samples_per_param, std::uint64_t sample_seed) {
  if (!(eps > 0.0 && eps <= 1e-2))
    throw std::invalid_argument("grad_check: eps must lie in (0, 1e-2]");
  params.zero_grad();
  auto loss = f();
  if (!loss->value.all_finite()) throw std::runtime_error("grad_check: non-finite loss");
  ag::backward(loss);

  std::mt19937_64 rng(sample_seed);
  double worst = 0.0;
  for (const auto& [name, var] : params.params()) {
    (void)name;
    const std::int64_t n = var->value.numel();
    std::vector<std::int64_t> coords;
    if (n <= samples_per_param) {
      for (std::int64_t i = 0; i < n; ++i) coords.push_back(i);
    } else {
      std::uniform_int_distribution<std::int64_t> pick(0, n - 1);
      for (int i = 0; i < samples_per_param; ++i) coords.push_back(pick(rng));
    }
    for (std::int64_t c : coords) {
      const double analytic =
          var->grad.shape == var->value.shape ? var->grad.data[c] : 0.0;
      auto numeric_at = [&](double step) {
        const double saved = var->value.data[c];
        var->value.data[c] = saved + step;
        const double up = f()->value.data[0];
        var->value.data[c] = saved - step;
        const double down = f()->value.data[0];
        var->value.data[c] = saved;
        if (!std::isfinite(up) || !std::isfinite(down))
          throw std::runtime_error("grad_check: non-finite loss during perturbation");
        return (up - down) / (2.0 * step);
      };
      auto rel_err = [&](double numeric) {
        return std::fabs(analytic - numeric) /
               std::max(1e-8, std::fabs(analytic) + std::fabs(numeric));
      };
      double err = rel_err(numeric_at(eps));
      // Near-zero gradients sit below the roundoff of the difference
      // quotient; a coarser step shrinks roundoff, and a genuine mismatch
      // stays wrong at every step size.
      if (err > 1e-5) {
        const double coarse = std::min(1e-2, eps * 100.0);
        err = std::min(err, rel_err(numeric_at(coarse)));
      }
      worst = std::max(worst, err);
    }
  }
  return worst;
}

}  // namespace rasap
