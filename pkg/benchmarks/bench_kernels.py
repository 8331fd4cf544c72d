"""Compare the compiled kernels with the numpy fallback.

Usage: python benchmarks/bench_kernels.py [--repeat N]

Times each kernel on shapes typical of desk-scale runs, then times one full
transductive episode with each backend swapped in.
"""
import argparse
import timeit

import numpy as np

from fewshotkit.ndgrad import kernels


def kernel_cases(rng):
    z = rng.normal(size=(75, 80))
    g = rng.normal(size=z.shape)
    p = kernels.get_backend("python").softmax_fwd(z)
    y, norms = kernels.get_backend("python").l2norm_fwd(z, 1e-12)
    x = rng.normal(size=(128, 64))
    gamma, beta, gx = np.ones(64), np.zeros(64), rng.normal(size=x.shape)
    _, xhat, _, var = kernels.get_backend("python").batchnorm_fwd(x, gamma, beta, 1e-5)
    flat = rng.normal(size=10_000)
    gflat = rng.normal(size=flat.shape)
    return {
        "softmax_fwd (75x80)": lambda k: k.softmax_fwd(z),
        "log_softmax_fwd (75x80)": lambda k: k.log_softmax_fwd(z),
        "softmax_bwd (75x80)": lambda k: k.softmax_bwd(p, g),
        "l2norm_fwd (75x80)": lambda k: k.l2norm_fwd(z, 1e-12),
        "l2norm_bwd (75x80)": lambda k: k.l2norm_bwd(y, norms, g),
        "batchnorm_fwd (128x64)": lambda k: k.batchnorm_fwd(x, gamma, beta, 1e-5),
        "batchnorm_bwd (128x64)": lambda k: k.batchnorm_bwd(gx, xhat, var, gamma, 1e-5),
        "adam_update (10k)": lambda k: k.adam_update(flat.copy(), gflat, np.zeros_like(flat),
                                                     np.zeros_like(flat), 1e-3, 0.9, 0.999,
                                                     1e-8, 1, 0.0),
        "sgd_update (10k)": lambda k: k.sgd_update(flat.copy(), gflat, np.zeros_like(flat),
                                                   0.1, 0.9, 1e-4, True),
    }


def use_backend(name):
    impl = kernels.get_backend(name)
    for k in kernels.KERNEL_NAMES:
        setattr(kernels, k, getattr(impl, k))


def episode_timer():
    from fewshotkit.backbone import PretrainConfig, pretrain
    from fewshotkit.datakit import SyntheticSpec, make_synthetic, mint_episodes, split_classes
    from fewshotkit.fewshot import AdaptConfig, evaluate_episode

    ds = make_synthetic(SyntheticSpec(seed=0))
    split = split_classes(ds, (0.6, 0.2, 0.2), 0)
    theta = pretrain(ds, split.part("train+val"), PretrainConfig(cycles=(1, 1))).params
    ep = mint_episodes(ds, split.test, 5, 1, 15, 1, master_seed=0)[0]
    return lambda: evaluate_episode(theta, ep, "transductive", AdaptConfig())


def best_of(fn, repeat, number):
    return min(timeit.repeat(fn, repeat=repeat, number=number)) / number


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if not kernels.compiled_available():
        print("compiled kernels are not built; only the numpy fallback is available")
        return
    backends = {name: kernels.get_backend(name) for name in ("python", "cython")}
    cases = kernel_cases(np.random.default_rng(0))
    print(f"{'kernel':<28}{'numpy (us)':>12}{'cython (us)':>13}{'speedup':>9}")
    for label, fn in cases.items():
        t = {n: best_of(lambda: fn(k), args.repeat, 200) * 1e6 for n, k in backends.items()}
        print(f"{label:<28}{t['python']:>12.1f}{t['cython']:>13.1f}{t['python'] / t['cython']:>8.2f}x")

    run = episode_timer()
    t = {}
    for name in ("python", "cython"):
        use_backend(name)
        t[name] = best_of(run, args.repeat, 3) * 1e3
    print(f"{'transductive episode':<28}{t['python']:>10.1f}ms{t['cython']:>11.1f}ms"
          f"{t['python'] / t['cython']:>8.2f}x")


if __name__ == "__main__":
    main()
