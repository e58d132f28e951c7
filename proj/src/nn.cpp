#include "crend/nn.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace crend {

namespace {

void require_dims(const Tensor& t, std::size_t ndim, const char* context) {
    if (t.ndim() != ndim) {
        throw std::invalid_argument(std::string(context) + ": expected " + std::to_string(ndim) +
                                    "-d tensor, got shape " + shape_to_string(t.shape()));
    }
}

}  // namespace

Tensor linear_forward(const Tensor& x, const Tensor& w, const Tensor& b) {
    require_dims(x, 2, "linear_forward(x)");
    require_dims(w, 2, "linear_forward(w)");
    const std::size_t m = x.dim(0);
    const std::size_t din = x.dim(1);
    const std::size_t dout = w.dim(0);
    if (w.dim(1) != din || b.size() != dout) {
        throw std::invalid_argument("linear_forward: incompatible shapes x=" +
                                    shape_to_string(x.shape()) + " w=" + shape_to_string(w.shape()) +
                                    " b=" + shape_to_string(b.shape()));
    }
    Tensor y({m, dout});
    for (std::size_t i = 0; i < m; ++i) {
        const double* xi = x.data() + i * din;
        double* yi = y.data() + i * dout;
        for (std::size_t o = 0; o < dout; ++o) {
            const double* wo = w.data() + o * din;
            double acc = b[o];
            for (std::size_t j = 0; j < din; ++j) acc += wo[j] * xi[j];
            yi[o] = acc;
        }
    }
    return y;
}

void linear_backward(const Tensor& x, const Tensor& w, const Tensor& grad_y,
                     Tensor* grad_x, Tensor& grad_w, Tensor& grad_b) {
    const std::size_t m = x.dim(0);
    const std::size_t din = x.dim(1);
    const std::size_t dout = w.dim(0);
    if (grad_y.dim(0) != m || grad_y.dim(1) != dout) {
        throw std::invalid_argument("linear_backward: grad shape " +
                                    shape_to_string(grad_y.shape()) + " does not match output " +
                                    std::to_string(m) + "x" + std::to_string(dout));
    }
    for (std::size_t i = 0; i < m; ++i) {
        const double* xi = x.data() + i * din;
        const double* gy = grad_y.data() + i * dout;
        for (std::size_t o = 0; o < dout; ++o) {
            const double g = gy[o];
            if (g == 0.0) continue;
            double* gw = grad_w.data() + o * din;
            for (std::size_t j = 0; j < din; ++j) gw[j] += g * xi[j];
            grad_b[o] += g;
        }
        if (grad_x) {
            double* gx = grad_x->data() + i * din;
            for (std::size_t o = 0; o < dout; ++o) {
                const double g = gy[o];
                if (g == 0.0) continue;
                const double* wo = w.data() + o * din;
                for (std::size_t j = 0; j < din; ++j) gx[j] += g * wo[j];
            }
        }
    }
}

Tensor conv2d_forward(const Tensor& x, const Tensor& w, const Tensor& b, int stride) {
    require_dims(x, 3, "conv2d_forward(x)");
    require_dims(w, 4, "conv2d_forward(w)");
    const int cin = static_cast<int>(x.dim(0));
    const int h = static_cast<int>(x.dim(1));
    const int width = static_cast<int>(x.dim(2));
    const int cout = static_cast<int>(w.dim(0));
    const int k = static_cast<int>(w.dim(2));
    if (static_cast<int>(w.dim(1)) != cin || static_cast<int>(w.dim(3)) != k) {
        throw std::invalid_argument("conv2d_forward: kernel " + shape_to_string(w.shape()) +
                                    " incompatible with input " + shape_to_string(x.shape()));
    }
    if (k % 2 == 0) {
        throw std::invalid_argument("conv2d_forward: kernel size must be odd, got " +
                                    std::to_string(k));
    }
    if (stride != 1 && stride != 2) {
        throw std::invalid_argument("conv2d_forward: unsupported stride " + std::to_string(stride));
    }
    if (b.size() != static_cast<std::size_t>(cout)) {
        throw std::invalid_argument("conv2d_forward: bias size " + std::to_string(b.size()) +
                                    " != out channels " + std::to_string(cout));
    }
    const int pad = (k - 1) / 2;
    const int oh = (h + 2 * pad - k) / stride + 1;
    const int ow = (width + 2 * pad - k) / stride + 1;

    Tensor y({static_cast<std::size_t>(cout), static_cast<std::size_t>(oh),
              static_cast<std::size_t>(ow)});
    for (int oc = 0; oc < cout; ++oc) {
        double* ybase = y.data() + static_cast<std::size_t>(oc) * oh * ow;
        const double bias = b[oc];
        for (int oy = 0; oy < oh; ++oy) {
            for (int ox = 0; ox < ow; ++ox) ybase[oy * ow + ox] = bias;
        }
        for (int ic = 0; ic < cin; ++ic) {
            const double* xbase = x.data() + static_cast<std::size_t>(ic) * h * width;
            const double* wbase =
                w.data() + (static_cast<std::size_t>(oc) * cin + ic) * k * k;
            for (int ky = 0; ky < k; ++ky) {
                for (int kx = 0; kx < k; ++kx) {
                    const double wv = wbase[ky * k + kx];
                    if (wv == 0.0) continue;
                    for (int oy = 0; oy < oh; ++oy) {
                        const int iy = oy * stride - pad + ky;
                        if (iy < 0 || iy >= h) continue;
                        const double* xrow = xbase + iy * width;
                        double* yrow = ybase + oy * ow;
                        for (int ox = 0; ox < ow; ++ox) {
                            const int ix = ox * stride - pad + kx;
                            if (ix < 0 || ix >= width) continue;
                            yrow[ox] += wv * xrow[ix];
                        }
                    }
                }
            }
        }
    }
    return y;
}

void conv2d_backward(const Tensor& x, const Tensor& w, const Tensor& grad_y, int stride,
                     Tensor* grad_x, Tensor& grad_w, Tensor& grad_b) {
    const int cin = static_cast<int>(x.dim(0));
    const int h = static_cast<int>(x.dim(1));
    const int width = static_cast<int>(x.dim(2));
    const int cout = static_cast<int>(w.dim(0));
    const int k = static_cast<int>(w.dim(2));
    const int pad = (k - 1) / 2;
    const int oh = static_cast<int>(grad_y.dim(1));
    const int ow = static_cast<int>(grad_y.dim(2));

    for (int oc = 0; oc < cout; ++oc) {
        const double* gybase = grad_y.data() + static_cast<std::size_t>(oc) * oh * ow;
        double gb = 0.0;
        for (int i = 0; i < oh * ow; ++i) gb += gybase[i];
        grad_b[oc] += gb;

        for (int ic = 0; ic < cin; ++ic) {
            const double* xbase = x.data() + static_cast<std::size_t>(ic) * h * width;
            double* gwbase = grad_w.data() + (static_cast<std::size_t>(oc) * cin + ic) * k * k;
            const double* wbase = w.data() + (static_cast<std::size_t>(oc) * cin + ic) * k * k;
            double* gxbase =
                grad_x ? grad_x->data() + static_cast<std::size_t>(ic) * h * width : nullptr;
            for (int ky = 0; ky < k; ++ky) {
                for (int kx = 0; kx < k; ++kx) {
                    double gw = 0.0;
                    const double wv = wbase[ky * k + kx];
                    for (int oy = 0; oy < oh; ++oy) {
                        const int iy = oy * stride - pad + ky;
                        if (iy < 0 || iy >= h) continue;
                        const double* xrow = xbase + iy * width;
                        const double* gyrow = gybase + oy * ow;
                        double* gxrow = gxbase ? gxbase + iy * width : nullptr;
                        for (int ox = 0; ox < ow; ++ox) {
                            const int ix = ox * stride - pad + kx;
                            if (ix < 0 || ix >= width) continue;
                            const double g = gyrow[ox];
                            gw += g * xrow[ix];
                            if (gxrow) gxrow[ix] += g * wv;
                        }
                    }
                    gwbase[ky * k + kx] += gw;
                }
            }
        }
    }
}

Tensor relu(const Tensor& x) {
    Tensor y = x;
    for (double& v : y.values()) v = v > 0.0 ? v : 0.0;
    return y;
}

Tensor relu_backward(const Tensor& x, const Tensor& grad_y) {
    require_same_shape(x, grad_y, "relu_backward");
    Tensor gx(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) gx[i] = x[i] > 0.0 ? grad_y[i] : 0.0;
    return gx;
}

Tensor sigmoid(const Tensor& x) {
    Tensor y = x;
    for (double& v : y.values()) v = 1.0 / (1.0 + std::exp(-v));
    return y;
}

Tensor sigmoid_backward(const Tensor& y, const Tensor& grad_y) {
    require_same_shape(y, grad_y, "sigmoid_backward");
    Tensor gx(y.shape());
    for (std::size_t i = 0; i < y.size(); ++i) gx[i] = grad_y[i] * y[i] * (1.0 - y[i]);
    return gx;
}

namespace {

struct BilinearCell {
    int x0, y0, x1, y1;
    double fx, fy;
};

BilinearCell locate(const Point01& p, int g) {
    const double cx = p.x * (g - 1);
    const double cy = p.y * (g - 1);
    int x0 = static_cast<int>(std::floor(cx));
    int y0 = static_cast<int>(std::floor(cy));
    x0 = std::clamp(x0, 0, g - 2);
    y0 = std::clamp(y0, 0, g - 2);
    return {x0, y0, x0 + 1, y0 + 1, cx - x0, cy - y0};
}

}  // namespace

Tensor bilinear_sample(const Tensor& fm, const std::vector<Point01>& points) {
    require_dims(fm, 3, "bilinear_sample(fm)");
    const int channels = static_cast<int>(fm.dim(0));
    const int g = static_cast<int>(fm.dim(1));
    if (static_cast<int>(fm.dim(2)) != g || g < 2) {
        throw std::invalid_argument("bilinear_sample: feature map must be C x G x G with G >= 2, got " +
                                    shape_to_string(fm.shape()));
    }
    Tensor out({points.size(), static_cast<std::size_t>(channels)});
    for (std::size_t m = 0; m < points.size(); ++m) {
        const BilinearCell cell = locate(points[m], g);
        const double w00 = (1.0 - cell.fy) * (1.0 - cell.fx);
        const double w01 = (1.0 - cell.fy) * cell.fx;
        const double w10 = cell.fy * (1.0 - cell.fx);
        const double w11 = cell.fy * cell.fx;
        double* row = out.data() + m * channels;
        for (int c = 0; c < channels; ++c) {
            const double* ch = fm.data() + static_cast<std::size_t>(c) * g * g;
            row[c] = w00 * ch[cell.y0 * g + cell.x0] + w01 * ch[cell.y0 * g + cell.x1] +
                     w10 * ch[cell.y1 * g + cell.x0] + w11 * ch[cell.y1 * g + cell.x1];
        }
    }
    return out;
}

void bilinear_sample_backward(const Tensor& fm, const std::vector<Point01>& points,
                              const Tensor& grad_out, Tensor* grad_fm, Tensor* grad_points) {
    const int channels = static_cast<int>(fm.dim(0));
    const int g = static_cast<int>(fm.dim(1));
    if (grad_out.dim(0) != points.size() ||
        grad_out.dim(1) != static_cast<std::size_t>(channels)) {
        throw std::invalid_argument("bilinear_sample_backward: grad shape " +
                                    shape_to_string(grad_out.shape()) + " does not match " +
                                    std::to_string(points.size()) + " points x " +
                                    std::to_string(channels) + " channels");
    }
    const double scale = static_cast<double>(g - 1);
    for (std::size_t m = 0; m < points.size(); ++m) {
        const BilinearCell cell = locate(points[m], g);
        const double w00 = (1.0 - cell.fy) * (1.0 - cell.fx);
        const double w01 = (1.0 - cell.fy) * cell.fx;
        const double w10 = cell.fy * (1.0 - cell.fx);
        const double w11 = cell.fy * cell.fx;
        const double* grow = grad_out.data() + m * channels;
        double gx = 0.0;
        double gy = 0.0;
        for (int c = 0; c < channels; ++c) {
            const double gv = grow[c];
            const std::size_t base = static_cast<std::size_t>(c) * g * g;
            const double v00 = fm[base + cell.y0 * g + cell.x0];
            const double v01 = fm[base + cell.y0 * g + cell.x1];
            const double v10 = fm[base + cell.y1 * g + cell.x0];
            const double v11 = fm[base + cell.y1 * g + cell.x1];
            if (grad_fm) {
                double* gfm = grad_fm->data() + base;
                gfm[cell.y0 * g + cell.x0] += gv * w00;
                gfm[cell.y0 * g + cell.x1] += gv * w01;
                gfm[cell.y1 * g + cell.x0] += gv * w10;
                gfm[cell.y1 * g + cell.x1] += gv * w11;
            }
            gx += gv * ((1.0 - cell.fy) * (v01 - v00) + cell.fy * (v11 - v10));
            gy += gv * ((1.0 - cell.fx) * (v10 - v00) + cell.fx * (v11 - v01));
        }
        if (grad_points) {
            (*grad_points)(m, 0) += gx * scale;
            (*grad_points)(m, 1) += gy * scale;
        }
    }
}

CrossEntropyResult softmax_cross_entropy(const Tensor& logits, const std::vector<int>& targets) {
    require_dims(logits, 2, "softmax_cross_entropy(logits)");
    const std::size_t m = logits.dim(0);
    const std::size_t classes = logits.dim(1);
    if (m < 1) {
        throw std::invalid_argument("softmax_cross_entropy: need at least one row");
    }
    if (targets.size() != m) {
        throw std::invalid_argument("softmax_cross_entropy: " + std::to_string(targets.size()) +
                                    " targets for " + std::to_string(m) + " rows");
    }
    CrossEntropyResult res;
    res.grad_logits = Tensor(logits.shape());
    double total = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        const int t = targets[i];
        if (t < 0 || static_cast<std::size_t>(t) >= classes) {
            throw std::invalid_argument("softmax_cross_entropy: label " + std::to_string(t) +
                                        " outside [0, " + std::to_string(classes - 1) + "]");
        }
        const double* row = logits.data() + i * classes;
        double mx = row[0];
        for (std::size_t j = 1; j < classes; ++j) mx = std::max(mx, row[j]);
        double denom = 0.0;
        for (std::size_t j = 0; j < classes; ++j) denom += std::exp(row[j] - mx);
        const double log_denom = mx + std::log(denom);
        total += log_denom - row[t];
        double* grow = res.grad_logits.data() + i * classes;
        for (std::size_t j = 0; j < classes; ++j) {
            grow[j] = std::exp(row[j] - log_denom) / static_cast<double>(m);
        }
        grow[t] -= 1.0 / static_cast<double>(m);
    }
    res.loss = total / static_cast<double>(m);
    return res;
}

Tensor softmax_rows(const Tensor& logits) {
    require_dims(logits, 2, "softmax_rows");
    const std::size_t m = logits.dim(0);
    const std::size_t classes = logits.dim(1);
    Tensor out(logits.shape());
    for (std::size_t i = 0; i < m; ++i) {
        const double* row = logits.data() + i * classes;
        double* orow = out.data() + i * classes;
        double mx = row[0];
        for (std::size_t j = 1; j < classes; ++j) mx = std::max(mx, row[j]);
        double denom = 0.0;
        for (std::size_t j = 0; j < classes; ++j) {
            orow[j] = std::exp(row[j] - mx);
            denom += orow[j];
        }
        for (std::size_t j = 0; j < classes; ++j) orow[j] /= denom;
    }
    return out;
}

BceResult bce_with_logits(const Tensor& logits, const Tensor& targets) {
    require_same_shape(logits, targets, "bce_with_logits");
    const std::size_t n = logits.size();
    if (n == 0) throw std::invalid_argument("bce_with_logits: empty input");
    BceResult res;
    res.grad_logits = Tensor(logits.shape());
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double z = logits[i];
        const double t = targets[i];
        total += std::max(z, 0.0) - z * t + std::log1p(std::exp(-std::abs(z)));
        const double p = 1.0 / (1.0 + std::exp(-z));
        res.grad_logits[i] = (p - t) / static_cast<double>(n);
    }
    res.loss = total / static_cast<double>(n);
    return res;
}

}  // namespace crend
