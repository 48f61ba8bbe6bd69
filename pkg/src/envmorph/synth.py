"""Rule-based envelope synthesis and morph-tuple generation.

Envelopes are impulse trains described by four perceptual parameters:
quantity (impulse count), placement (onset of the first impulse), spacing
(inter-onset interval) and amplitude (peak level). A morph tuple renders the
same parameter context at interpolation weights 0, 1 and alpha, giving
supervised (E_a, E_b, E_morph, alpha) records. Impulses are Gaussian bumps by
default; naturalistic impulse templates can be substituted as the kernel.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .envelope import FRAME_COUNT, FRAME_RATE, CLIP_SECONDS, Envelope, load_envelope, save_envelope
from .errors import GenerationExhausted, InvalidArgument, InvalidSpec
from .fileio import atomic_write_text
from .seeding import NS_TRAIN_TUPLES, derive_seed, splitmix64

AXIS_NAMES = ("amplitude", "placement", "spacing", "quantity")

DEFAULT_KERNEL_WIDTH = 0.2  # seconds, full width at half maximum
# FWHM -> standard deviation of the Gaussian bump.
_FWHM_TO_SIGMA = 1.0 / (2.0 * math.sqrt(2.0 * math.log(2.0)))
_TRUNCATION_SIGMAS = 3.0

ALPHA_GRID = tuple(round(0.1 * k, 1) for k in range(1, 10))

_MAX_CONTEXT_ATTEMPTS = 100


def round_half_away(x: float) -> int:
    """Round half away from zero (ties at .5 go up for non-negative input)."""
    return int(math.floor(x + 0.5)) if x >= 0 else -int(math.floor(-x + 0.5))


@dataclass(frozen=True)
class ParamRanges:
    quantity_range: tuple[int, int] = (4, 16)
    ioi_range: tuple[float, float] = (0.3, 0.75)
    onset_range: tuple[float, float] = (0.01, 3.6)
    amplitude_range: tuple[float, float] = (0.2, 1.0)

    def __post_init__(self):
        for name in ("quantity_range", "ioi_range", "onset_range", "amplitude_range"):
            lo, hi = getattr(self, name)
            if not lo < hi:
                raise InvalidArgument(f"{name} must satisfy low < high, got ({lo}, {hi})")


@dataclass(frozen=True)
class ImpulseTrainSpec:
    quantity: int
    onset: float
    ioi: float
    amplitude: float
    kernel_width: float = DEFAULT_KERNEL_WIDTH

    def centers(self) -> np.ndarray:
        """Impulse center times in seconds."""
        return self.onset + self.ioi * np.arange(self.quantity, dtype=np.float64)


def validate_spec(spec: ImpulseTrainSpec) -> bool:
    """True iff the spec obeys the non-overlap and within-duration rules."""
    if spec.quantity < 0 or spec.quantity != int(spec.quantity):
        return False
    if not (0.0 < spec.amplitude <= 1.0):
        return False
    if spec.kernel_width <= 0.0:
        return False
    if spec.onset < 0.0:
        return False
    if spec.quantity >= 2 and (spec.ioi < 0.0 or spec.ioi < spec.kernel_width):
        return False
    if spec.quantity >= 1:
        last_center = spec.onset + (spec.quantity - 1) * spec.ioi
        if last_center + spec.kernel_width / 2.0 > CLIP_SECONDS:
            return False
    return True


def render_gaussian_train(spec: ImpulseTrainSpec) -> Envelope:
    """Sum of Gaussian bumps on the 2048-frame grid, truncated at +-3 sigma.

    Frame f samples time f / 204.8, so an impulse centered on a grid point
    attains exactly `amplitude` there. Overlapping tails sum, then clamp to 1.
    """
    if not validate_spec(spec):
        raise InvalidSpec(f"invalid impulse train spec: {spec}")
    frames = np.zeros(FRAME_COUNT, dtype=np.float64)
    if spec.quantity == 0:
        return Envelope(frames.astype(np.float32))
    sigma = spec.kernel_width * _FWHM_TO_SIGMA
    radius = _TRUNCATION_SIGMAS * sigma
    for center in spec.centers():
        lo = max(int(math.ceil((center - radius) * FRAME_RATE)), 0)
        hi = min(int(math.floor((center + radius) * FRAME_RATE)), FRAME_COUNT - 1)
        if hi < lo:
            continue
        t = np.arange(lo, hi + 1, dtype=np.float64) / FRAME_RATE
        frames[lo : hi + 1] += spec.amplitude * np.exp(-((t - center) ** 2) / (2.0 * sigma**2))
    np.clip(frames, 0.0, 1.0, out=frames)
    return Envelope(frames.astype(np.float32))


@dataclass(frozen=True)
class ImpulseTemplate:
    """A short naturalistic impulse snippet on the envelope grid, peak 1."""

    name: str
    frames: np.ndarray

    def __post_init__(self):
        frames = np.ascontiguousarray(self.frames, dtype=np.float32)
        if frames.ndim != 1 or not 1 <= frames.size <= int(FRAME_RATE):
            raise InvalidArgument("template must be a 1-D snippet of at most 1 s")
        if not np.all(np.isfinite(frames)) or frames.min() < 0.0:
            raise InvalidArgument("template frames must be finite and non-negative")
        if abs(float(frames.max()) - 1.0) > 1e-6:
            raise InvalidArgument("template peak must equal 1")
        frames.setflags(write=False)
        object.__setattr__(self, "frames", frames)

    @property
    def peak_index(self) -> int:
        return int(np.argmax(self.frames))

    @property
    def duration(self) -> float:
        return self.frames.size / FRAME_RATE


def _template_bounds_ok(spec: ImpulseTrainSpec, template: ImpulseTemplate) -> bool:
    if spec.quantity == 0:
        return True
    p = template.peak_index
    length = template.frames.size
    first = round_half_away(spec.onset * FRAME_RATE) - p
    last_center = spec.onset + (spec.quantity - 1) * spec.ioi
    last = round_half_away(last_center * FRAME_RATE) - p
    return first >= 0 and last + length <= FRAME_COUNT


def validate_template_spec(spec: ImpulseTrainSpec, template: ImpulseTemplate) -> bool:
    """Overlap rule with the template length in place of the kernel width."""
    if spec.quantity < 0 or spec.quantity != int(spec.quantity):
        return False
    if not (0.0 < spec.amplitude <= 1.0):
        return False
    if spec.onset < 0.0:
        return False
    if spec.quantity >= 2 and spec.ioi < template.duration:
        return False
    return _template_bounds_ok(spec, template)


def render_naturalistic_train(spec: ImpulseTrainSpec, template: ImpulseTemplate) -> Envelope:
    """Place amplitude-scaled template copies with peaks aligned to each center."""
    if not validate_template_spec(spec, template):
        raise InvalidSpec(f"spec {spec} incompatible with template {template.name!r}")
    frames = np.zeros(FRAME_COUNT, dtype=np.float64)
    p = template.peak_index
    snippet = template.frames.astype(np.float64)
    for center in spec.centers():
        start = round_half_away(center * FRAME_RATE) - p
        frames[start : start + snippet.size] += spec.amplitude * snippet
    np.clip(frames, 0.0, 1.0, out=frames)
    return Envelope(frames.astype(np.float32))


class GaussianKernel:
    """Default impulse kernel: Gaussian bump of fixed FWHM."""

    def __init__(self, width: float = DEFAULT_KERNEL_WIDTH):
        if width <= 0:
            raise InvalidArgument("kernel width must be positive")
        self.width = width

    name = "gaussian"

    @property
    def spec_width(self) -> float:
        return self.width

    def validate(self, spec: ImpulseTrainSpec) -> bool:
        return validate_spec(spec)

    def render(self, spec: ImpulseTrainSpec) -> Envelope:
        return render_gaussian_train(spec)


class TemplateKernel:
    """Impulse kernel backed by a naturalistic template snippet."""

    def __init__(self, template: ImpulseTemplate):
        self.template = template

    @property
    def name(self) -> str:
        return f"template:{self.template.name}"

    @property
    def spec_width(self) -> float:
        return self.template.duration

    def validate(self, spec: ImpulseTrainSpec) -> bool:
        return validate_template_spec(spec, self.template)

    def render(self, spec: ImpulseTrainSpec) -> Envelope:
        return render_naturalistic_train(spec, self.template)


@dataclass(frozen=True)
class Axis:
    varied: bool
    a: float
    b: float

    def value_at(self, alpha: float) -> float:
        if not self.varied:
            return self.a
        return (1.0 - alpha) * self.a + alpha * self.b


@dataclass(frozen=True)
class AxisSet:
    amplitude: Axis
    placement: Axis
    spacing: Axis
    quantity: Axis

    def __post_init__(self):
        if not any(self.axis(n).varied for n in AXIS_NAMES):
            raise InvalidArgument("AxisSet requires at least one varied axis")

    def axis(self, name: str) -> Axis:
        return getattr(self, name)

    def varied_names(self) -> tuple[str, ...]:
        return tuple(n for n in AXIS_NAMES if self.axis(n).varied)

    def spec_at(self, alpha: float, kernel_width: float = DEFAULT_KERNEL_WIDTH) -> ImpulseTrainSpec:
        return ImpulseTrainSpec(
            quantity=round_half_away(self.quantity.value_at(alpha)),
            onset=self.placement.value_at(alpha),
            ioi=self.spacing.value_at(alpha),
            amplitude=self.amplitude.value_at(alpha),
            kernel_width=kernel_width,
        )


@dataclass(frozen=True)
class MorphTuple:
    e_a: Envelope
    e_b: Envelope
    e_morph: Envelope
    alpha: float
    axes: AxisSet
    seed: int
    kernel: str = "gaussian"

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise InvalidArgument(f"alpha must lie in [0, 1], got {self.alpha}")


def dimension_envelope(axes: AxisSet, alpha: float, kernel=None) -> Envelope:
    """Render the interpolated parameter point of an axis set (the morph rule)."""
    if not 0.0 <= alpha <= 1.0:
        raise InvalidArgument(f"alpha must lie in [0, 1], got {alpha}")
    kernel = kernel or GaussianKernel()
    spec = axes.spec_at(alpha, kernel.spec_width)
    if not kernel.validate(spec):
        raise InvalidSpec(f"interpolated spec invalid at alpha={alpha}: {spec}")
    return kernel.render(spec)


def _draw_context(rng: np.random.Generator, ranges: ParamRanges) -> dict[str, float]:
    qlo, qhi = ranges.quantity_range
    return {
        "quantity": float(rng.integers(qlo, qhi + 1)),
        "placement": float(rng.uniform(*ranges.onset_range)),
        "spacing": float(rng.uniform(*ranges.ioi_range)),
        "amplitude": float(rng.uniform(*ranges.amplitude_range)),
    }


def _draw_endpoints(rng: np.random.Generator, axis: str, ranges: ParamRanges) -> tuple[float, float]:
    if axis == "quantity":
        qlo, qhi = ranges.quantity_range
        pair = rng.choice(np.arange(qlo, qhi + 1), size=2, replace=False)
        return float(pair[0]), float(pair[1])
    rng_map = {
        "placement": ranges.onset_range,
        "spacing": ranges.ioi_range,
        "amplitude": ranges.amplitude_range,
    }
    lo, hi = rng_map[axis]
    return float(rng.uniform(lo, hi)), float(rng.uniform(lo, hi))


def sample_axis_set(
    rng: np.random.Generator,
    varied: tuple[str, ...],
    ranges: ParamRanges,
    endpoints: dict[str, tuple[float, float]] | None = None,
) -> AxisSet:
    """Draw one parameter context: endpoints for varied axes, values for fixed ones."""
    endpoints = endpoints or {}
    context = _draw_context(rng, ranges)
    axes = {}
    for name in AXIS_NAMES:
        if name in varied:
            a, b = endpoints.get(name) or _draw_endpoints(rng, name, ranges)
            axes[name] = Axis(True, a, b)
        else:
            axes[name] = Axis(False, context[name], context[name])
    return AxisSet(**axes)


def _check_varied(varied) -> tuple[str, ...]:
    varied = tuple(varied)
    if not varied or len(set(varied)) != len(varied):
        raise InvalidArgument("varied axes must be a non-empty set of distinct names")
    for name in varied:
        if name not in AXIS_NAMES:
            raise InvalidArgument(f"unknown axis {name!r}; expected one of {AXIS_NAMES}")
    return varied


def generate_tuple_with_rng(
    varied,
    alpha: float,
    rng: np.random.Generator,
    seed: int,
    *,
    kernel=None,
    ranges: ParamRanges | None = None,
    endpoints: dict[str, tuple[float, float]] | None = None,
) -> MorphTuple:
    varied = _check_varied(varied)
    if not 0.0 <= alpha <= 1.0:
        raise InvalidArgument(f"alpha must lie in [0, 1], got {alpha}")
    kernel = kernel or GaussianKernel()
    ranges = ranges or ParamRanges()
    for _ in range(_MAX_CONTEXT_ATTEMPTS):
        axes = sample_axis_set(rng, varied, ranges, endpoints)
        specs = [axes.spec_at(a, kernel.spec_width) for a in (0.0, 1.0, alpha)]
        if all(kernel.validate(s) for s in specs):
            return MorphTuple(
                e_a=kernel.render(specs[0]),
                e_b=kernel.render(specs[1]),
                e_morph=kernel.render(specs[2]),
                alpha=alpha,
                axes=axes,
                seed=seed,
                kernel=kernel.name,
            )
    raise GenerationExhausted(
        f"no valid context for axes {varied} in {_MAX_CONTEXT_ATTEMPTS} attempts"
    )


def generate_tuple(varied, alpha, rng_seed: int, *, kernel=None, ranges=None, endpoints=None) -> MorphTuple:
    """Draw a random valid context and render (E_a, E_b, E_morph) at alpha."""
    rng = np.random.Generator(np.random.PCG64(rng_seed))
    return generate_tuple_with_rng(
        varied, alpha, rng, rng_seed, kernel=kernel, ranges=ranges, endpoints=endpoints
    )


@dataclass(frozen=True)
class DatasetConfig:
    count: int
    base_seed: int = 0
    combos: tuple[tuple[str, ...], ...] = tuple((n,) for n in AXIS_NAMES)
    alpha_mode: str = "uniform"  # "uniform" (continuous) or "grid" ({0.1..0.9})
    ranges: ParamRanges = field(default_factory=ParamRanges)
    kernel_name: str = "gaussian"
    namespace: int = NS_TRAIN_TUPLES

    def __post_init__(self):
        if self.count < 1:
            raise InvalidArgument("count must be >= 1")
        if self.alpha_mode not in ("uniform", "grid"):
            raise InvalidArgument(f"unknown alpha_mode {self.alpha_mode!r}")
        for combo in self.combos:
            _check_varied(combo)


def _draw_alpha(rng: np.random.Generator, mode: str) -> float:
    if mode == "grid":
        return float(rng.choice(ALPHA_GRID))
    return float(rng.uniform(0.0, 1.0))


def resolve_kernel(name: str):
    """Kernel factory for config/CLI names: "gaussian" or "template:<name>"."""
    if name == "gaussian":
        return GaussianKernel()
    if name.startswith("template:"):
        return TemplateKernel(bundled_template(name.split(":", 1)[1]))
    raise InvalidArgument(f"unknown kernel {name!r}")


def iter_dataset_tuples(cfg: DatasetConfig):
    """Yield the deterministic tuple stream for a dataset config."""
    kernel = resolve_kernel(cfg.kernel_name)
    for i in range(cfg.count):
        combo = cfg.combos[i % len(cfg.combos)]
        seed = derive_seed(cfg.base_seed, cfg.namespace, i)
        rng = np.random.Generator(np.random.PCG64(seed))
        alpha = _draw_alpha(rng, cfg.alpha_mode)
        try:
            yield generate_tuple_with_rng(combo, alpha, rng, seed, kernel=kernel, ranges=cfg.ranges)
        except GenerationExhausted as exc:
            raise GenerationExhausted(str(exc), tuple_index=i) from exc


def _axes_to_json(axes: AxisSet) -> dict:
    return {
        name: {"varied": axes.axis(name).varied, "a": axes.axis(name).a, "b": axes.axis(name).b}
        for name in AXIS_NAMES
    }


def _axes_from_json(obj: dict) -> AxisSet:
    return AxisSet(**{name: Axis(obj[name]["varied"], obj[name]["a"], obj[name]["b"]) for name in AXIS_NAMES})


def generate_dataset(cfg: DatasetConfig, out_dir) -> Path:
    """Write tuples as .env1 triples plus a JSONL manifest; returns the manifest path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    lines = []
    for i, tup in enumerate(iter_dataset_tuples(cfg)):
        names = {part: f"{i:06d}_{part}.env1" for part in ("a", "b", "morph")}
        save_envelope(tup.e_a, out_dir / names["a"])
        save_envelope(tup.e_b, out_dir / names["b"])
        save_envelope(tup.e_morph, out_dir / names["morph"])
        record = {
            "index": i,
            "alpha": tup.alpha,
            "axes": _axes_to_json(tup.axes),
            "seed": tup.seed,
            "kernel": tup.kernel,
            "paths": names,
        }
        lines.append(json.dumps(record))
    manifest = out_dir / "manifest.jsonl"
    atomic_write_text(manifest, "\n".join(lines) + "\n")
    return manifest


def load_dataset(manifest_path) -> list[MorphTuple]:
    manifest_path = Path(manifest_path)
    base = manifest_path.parent
    tuples = []
    with open(manifest_path, "r", encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            tuples.append(
                MorphTuple(
                    e_a=load_envelope(base / rec["paths"]["a"]),
                    e_b=load_envelope(base / rec["paths"]["b"]),
                    e_morph=load_envelope(base / rec["paths"]["morph"]),
                    alpha=rec["alpha"],
                    axes=_axes_from_json(rec["axes"]),
                    seed=rec["seed"],
                    kernel=rec.get("kernel", "gaussian"),
                )
            )
    return tuples


def midpoint_params(a: ImpulseTrainSpec, b: ImpulseTrainSpec) -> ImpulseTrainSpec:
    """Arithmetic mean of every numeric field; quantity rounds to nearest."""
    mid = ImpulseTrainSpec(
        quantity=round_half_away((a.quantity + b.quantity) / 2.0),
        onset=(a.onset + b.onset) / 2.0,
        ioi=(a.ioi + b.ioi) / 2.0,
        amplitude=(a.amplitude + b.amplitude) / 2.0,
        kernel_width=(a.kernel_width + b.kernel_width) / 2.0,
    )
    if not validate_spec(mid):
        raise InvalidSpec(f"midpoint of {a} and {b} is not a valid spec: {mid}")
    return mid


def detect_impulse_centers(
    frames: np.ndarray, threshold: float, min_separation: int = 1
) -> np.ndarray:
    """Local maxima above `threshold`, at least `min_separation` frames apart."""
    frames = np.asarray(frames, dtype=np.float64)
    rising = frames[1:-1] > frames[:-2]
    falling = frames[1:-1] >= frames[2:]
    peaks = np.where(rising & falling & (frames[1:-1] > threshold))[0] + 1
    if peaks.size == 0:
        return peaks
    kept: list[int] = []
    for idx in peaks[np.argsort(-frames[peaks], kind="stable")]:
        if all(abs(idx - j) >= min_separation for j in kept):
            kept.append(int(idx))
    return np.array(sorted(kept), dtype=np.int64)


# --- bundled naturalistic impulse templates ---------------------------------


def _smooth3(x: np.ndarray) -> np.ndarray:
    return np.convolve(x, np.ones(3) / 3.0, mode="same")


def _click_template() -> ImpulseTemplate:
    # Sharp attack, exponential decay (tau 50 ms) over 0.25 s.
    n = 51
    t = np.arange(n) / FRAME_RATE
    v = np.exp(-t / 0.05)
    v[0] = 0.35  # one-frame attack ramp
    v[1] = 1.0
    v /= v.max()
    return ImpulseTemplate("click", v.astype(np.float32))


def _knock_template() -> ImpulseTemplate:
    # Double-peak knock: main strike plus a weaker rebound 90 ms later.
    n = 51
    t = np.arange(n) / FRAME_RATE
    v = np.exp(-((t - 0.03) ** 2) / (2 * 0.012**2)) + 0.6 * np.exp(
        -((t - 0.12) ** 2) / (2 * 0.016**2)
    )
    v /= v.max()
    return ImpulseTemplate("knock", v.astype(np.float32))


def _noise_burst_template() -> ImpulseTemplate:
    # Hann-windowed rough burst; fixed seed keeps the snippet reproducible.
    n = 41
    rng = np.random.Generator(np.random.PCG64(splitmix64(0x6E6F6973)))
    rough = 0.6 + 0.4 * rng.random(n)
    window = np.hanning(n)
    v = _smooth3(rough * window)
    v = np.clip(v, 0.0, None)
    v /= v.max()
    return ImpulseTemplate("noise-burst", v.astype(np.float32))


_TEMPLATE_BUILDERS = {
    "click": _click_template,
    "knock": _knock_template,
    "noise-burst": _noise_burst_template,
}
_template_cache: dict[str, ImpulseTemplate] = {}


def bundled_template_names() -> tuple[str, ...]:
    return tuple(_TEMPLATE_BUILDERS)


def bundled_template(name: str) -> ImpulseTemplate:
    if name not in _TEMPLATE_BUILDERS:
        raise InvalidArgument(
            f"unknown template {name!r}; bundled templates: {bundled_template_names()}"
        )
    if name not in _template_cache:
        _template_cache[name] = _TEMPLATE_BUILDERS[name]()
    return _template_cache[name]


def template_from_envelope(name: str, frames: np.ndarray) -> ImpulseTemplate:
    """Build a template from an extracted envelope snippet (normalizes peak to 1)."""
    frames = np.asarray(frames, dtype=np.float64)
    peak = frames.max()
    if peak <= 0:
        raise InvalidArgument("template snippet must contain energy")
    return ImpulseTemplate(name, (frames / peak).astype(np.float32))


def gaussian_template(width: float = DEFAULT_KERNEL_WIDTH) -> ImpulseTemplate:
    """Discretized Gaussian bump as a template (consistency oracle for renderers)."""
    sigma_frames = width * _FWHM_TO_SIGMA * FRAME_RATE
    radius = int(math.floor(_TRUNCATION_SIGMAS * sigma_frames))
    d = np.arange(-radius, radius + 1, dtype=np.float64)
    v = np.exp(-(d**2) / (2.0 * sigma_frames**2))
    return ImpulseTemplate("gaussian", v.astype(np.float32))


def generate_envelope_corpus(
    count: int,
    base_seed: int,
    namespace: int,
    *,
    template_fraction: float = 0.3,
    ranges: ParamRanges | None = None,
) -> np.ndarray:
    """Random impulse-train envelopes for autoencoder training, [count, 2048] f32.

    A `template_fraction` share uses the bundled naturalistic templates so the
    learned representation covers both synthetic and naturalistic shapes.
    """
    ranges = ranges or ParamRanges()
    kernels = [TemplateKernel(bundled_template(n)) for n in bundled_template_names()]
    gaussian = GaussianKernel()
    out = np.empty((count, FRAME_COUNT), dtype=np.float32)
    for i in range(count):
        rng = np.random.Generator(np.random.PCG64(derive_seed(base_seed, namespace, i)))
        use_template = rng.random() < template_fraction
        kernel = kernels[int(rng.integers(len(kernels)))] if use_template else gaussian
        for attempt in range(_MAX_CONTEXT_ATTEMPTS):
            ctx = _draw_context(rng, ranges)
            spec = ImpulseTrainSpec(
                quantity=int(ctx["quantity"]),
                onset=ctx["placement"],
                ioi=ctx["spacing"],
                amplitude=ctx["amplitude"],
                kernel_width=kernel.spec_width,
            )
            if kernel.validate(spec):
                out[i] = kernel.render(spec).frames
                break
        else:
            raise GenerationExhausted("no valid corpus envelope context", tuple_index=i)
    return out
