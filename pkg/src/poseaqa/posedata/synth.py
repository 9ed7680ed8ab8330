"""Synthetic dives: an articulated stick figure with known phases and score.

The diver stands on a board (take-off), flies while somersaulting in a pike
or tuck (turning), straightens head-down (entry) and hits the water, after
which a splash blob is rendered (condition frames).  Execution errors are
extra hip/knee flexion on top of the ideal trajectory; the score is a closed
form of the realized angle error and the splash intensity.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import angles_from_joints, bbox_from_joints
from .types import DiveParams, PoseSequence

S_MAX = 100.0
C_ANGLE = 60.0  # points per radian of phase-weighted mean angle error
C_SPLASH = 12.0  # points per unit splash intensity
JUDGE_PHASE_WEIGHTS = (0.30, 0.55, 0.15)

DIFFICULTY_SOMERSAULTS = {1.6: 0, 2.0: 1, 2.6: 2, 3.2: 3}

TRUNK, THIGH, SHIN, UPPER_ARM, FOREARM = 0.10, 0.075, 0.075, 0.06, 0.055
BOARD_Y, BOARD_END = 0.44, 0.25
WATER_Y = 0.88
DEPTH_OFFSET = 0.006  # left side drawn slightly behind the right
BASE_HIP = 0.1


@dataclass
class DiveSample:
    frames: np.ndarray  # (T, H, W) float32
    pose: PoseSequence
    gt_keyframes: list
    score: float
    phase_deviation: np.ndarray  # realized mean |flexion error| per motion phase
    motion_deviation: float  # judge-weighted mean of phase_deviation


def _rot(vec, a):
    c, s = np.cos(a), np.sin(a)
    return np.stack([vec[..., 0] * c - vec[..., 1] * s, vec[..., 0] * s + vec[..., 1] * c], axis=-1)


def _smoothstep(x):
    x = np.clip(x, 0.0, 1.0)
    return x * x * (3 - 2 * x)


def _plateau(s, ramp=0.25):
    return _smoothstep(s / ramp) * _smoothstep((1 - s) / ramp)


def _envelope(s):
    return 1.0 - (2 * s - 1) ** 4


def _skeleton(root, theta, hip_flex, knee_flex, shoulder, elbow):
    """Joints for one side given per-frame kinematics; all args length T."""
    up = np.stack([np.sin(theta), -np.cos(theta)], axis=-1)
    sh = root + TRUNK * up
    thigh = _rot(-up, -hip_flex)
    knee = root + THIGH * thigh
    ankle = knee + SHIN * _rot(thigh, knee_flex)
    arm = _rot(-up, -shoulder)
    elb = sh + UPPER_ARM * arm
    wrist = elb + FOREARM * _rot(arm, -elbow)
    # order: wrist, elbow, shoulder, hip, knee, ankle
    return np.stack([wrist, elb, sh, root, knee, ankle], axis=1)


def ideal_flexion(params: DiveParams):
    """Ideal (T_motion, 4) flexion [l_hip, r_hip, l_knee, r_knee] and phase ids."""
    d1, d2, d3 = params.takeoff_frames, params.turning_frames, params.entry_frames
    tuck = params.somersaults >= 2
    hip_pos, knee_pos = (2.2, 2.0) if tuck else (2.0, 0.0)
    s1 = np.arange(d1) / d1
    s2 = np.arange(d2) / d2
    hip = np.concatenate([BASE_HIP + 0.6 * np.sin(np.pi * s1),
                          BASE_HIP + (hip_pos - BASE_HIP) * _plateau(s2),
                          np.full(d3, BASE_HIP)])
    knee = np.concatenate([0.9 * np.sin(np.pi * s1), knee_pos * _plateau(s2), np.zeros(d3)])
    phase = np.repeat([0, 1, 2], [d1, d2, d3])
    return np.stack([hip, hip, knee, knee], axis=1), phase


def _actual_flexion(params: DiveParams, rng):
    ideal, phase = ideal_flexion(params)
    d = (params.takeoff_frames, params.turning_frames, params.entry_frames)
    s = np.concatenate([np.arange(n) / n for n in d])
    env = _envelope(s)[:, None]
    flex = ideal + params.angle_deviation[phase] * env
    wob_phase = rng.uniform(0, 2 * np.pi)
    wob = params.wobble * np.sin(2 * np.pi * 3 * s + wob_phase) * _envelope(s)
    flex[:, :2] += np.where(phase == 1, wob, 0.0)[:, None]
    return ideal, np.clip(flex, 0.0, np.pi - 1e-3), phase


def _trajectory(params: DiveParams, flex):
    d1, d2, d3, d4 = (params.takeoff_frames, params.turning_frames, params.entry_frames,
                      params.condition_frames)
    T = d1 + d2 + d3 + d4
    theta = np.zeros(T)
    shoulder = np.zeros(T)
    elbow = np.zeros(T)
    hip = np.concatenate([flex[:, :2], np.full((d4, 2), flex[-1, :2])])
    knee = np.concatenate([flex[:, 2:], np.full((d4, 2), flex[-1, 2:])])

    s1 = np.arange(d1) / d1
    theta[:d1] = 0.25 * s1
    shoulder[:d1] = np.pi * s1
    elbow[:d1] = 0.2 * (1 - s1)

    theta_end = np.pi + 2 * np.pi * params.somersaults
    s2 = np.arange(d2) / d2
    theta[d1:d1 + d2] = 0.25 + (theta_end - 0.25) * (s2 - np.sin(2 * np.pi * s2) / (2 * np.pi))
    bump = _plateau(s2)
    shoulder[d1:d1 + d2] = np.pi + (hip[d1:d1 + d2, 1] - np.pi) * bump
    theta[d1 + d2:] = theta_end
    shoulder[d1 + d2:] = np.pi

    # take-off: feet planted on the board edge
    root = np.zeros((T, 2))
    legs = _skeleton(np.zeros((d1, 2)), theta[:d1], hip[:d1, 1], knee[:d1, 1], shoulder[:d1],
                     elbow[:d1])
    ankle = legs[:, 5]
    root[:d1] = np.array([BOARD_END - 0.01, BOARD_Y]) - ankle

    # flight: ballistic root from take-off to water contact of the hands
    y0 = root[d1 - 1, 1]
    tau_total = d2 + d3
    y_end = WATER_Y - (TRUNK + UPPER_ARM + FOREARM)
    apex = 0.05
    rate = (np.sqrt(2 * apex) + np.sqrt(2 * apex + 2 * (y_end - y0))) / tau_total
    g = rate * rate
    v0 = np.sqrt(2 * g * apex)
    tau = np.arange(1, tau_total + 1)
    x0 = root[d1 - 1, 0]
    x_end = 0.55
    root[d1:d1 + d2 + d3, 0] = x0 + (x_end - x0) * tau / tau_total
    root[d1:d1 + d2 + d3, 1] = y0 - v0 * tau + 0.5 * g * tau * tau
    # hands reach the water on the first condition frame
    v_end = -v0 + g * tau_total
    i = np.arange(d4)
    root[d1 + d2 + d3:, 0] = x_end
    sink = min(v_end * d4 / 3, 0.08)
    root[d1 + d2 + d3:, 1] = y_end + sink * (1 - np.exp(-3 * i / d4))
    return root, theta, hip, knee, shoulder, elbow, x_end


def _render(joints, splash_amp, splash_x, size):
    T = len(joints)
    ys, xs = np.meshgrid((np.arange(size) + 0.5) / size, (np.arange(size) + 0.5) / size,
                         indexing="ij")
    base = np.zeros((size, size))
    base[ys >= WATER_Y] = 0.25
    base[(ys >= BOARD_Y) & (ys < BOARD_Y + 0.025) & (xs <= BOARD_END)] = 0.5
    bones = [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5)]
    starts = np.array([side + a for side in (0, 6) for a, _ in bones])
    ends = np.array([side + b for side in (0, 6) for _, b in bones])
    frames = np.empty((T, size, size))
    pix = np.stack([xs, ys], axis=-1) * size  # pixel centres in pixel units
    for t in range(T):
        # ink only reaches 1.2 px from a bone, so work inside the figure's window
        lo = np.maximum(np.floor(joints[t].min(axis=0) * size - 2).astype(int), 0)
        hi = np.minimum(np.ceil(joints[t].max(axis=0) * size + 2).astype(int), size)
        win = pix[lo[1]:hi[1], lo[0]:hi[0]].reshape(-1, 2)
        p = joints[t, starts] * size  # (B, 2)
        seg = joints[t, ends] * size - p
        denom = np.maximum((seg * seg).sum(-1), 1e-12)
        rel = win[None] - p[:, None]  # (B, n, 2)
        h = np.clip((rel @ seg[:, :, None])[..., 0] / denom[:, None], 0, 1)
        d = rel - h[..., None] * seg[:, None]
        dist = np.sqrt((d * d).sum(-1))
        ink = np.zeros((size, size))
        ink[lo[1]:hi[1], lo[0]:hi[0]] = np.clip(1.2 - dist, 0, 1).max(axis=0).reshape(
            hi[1] - lo[1], hi[0] - lo[0])
        ink = np.where(ys >= WATER_Y, 0.5 * ink, ink)
        frame = np.maximum(base, ink)
        if splash_amp[t] > 0:
            blob = np.exp(-((xs - splash_x) ** 2) / (2 * 0.07 ** 2)
                          - ((ys - (WATER_Y - 0.03)) ** 2) / (2 * 0.06 ** 2))
            frame = frame + 0.7 * splash_amp[t] * blob
        frames[t] = np.clip(frame, 0.0, 1.0)
    return frames


def synth_dive(params: DiveParams) -> DiveSample:
    rng = np.random.default_rng(params.seed)
    ideal, flex, phase = _actual_flexion(params, rng)
    root, theta, hip, knee, shoulder, elbow, x_end = _trajectory(params, flex)

    right = _skeleton(root, theta, hip[:, 1], knee[:, 1], shoulder, elbow)
    left = _skeleton(root, theta, hip[:, 0], knee[:, 0], shoulder, elbow)
    left = left + np.array([DEPTH_OFFSET, 0.0])
    joints = np.concatenate([left, right], axis=1)

    d1, d2, d3, d4 = (params.takeoff_frames, params.turning_frames, params.entry_frames,
                      params.condition_frames)
    T = d1 + d2 + d3 + d4
    angles = angles_from_joints(joints)
    bbox = bbox_from_joints(joints)
    pose = PoseSequence(joints, angles, bbox)

    s = (np.arange(d4) + 1) / d4
    amp = np.zeros(T)
    amp[T - d4:] = params.splash * (s / 0.35) * np.exp(1 - s / 0.35)
    frames = _render(joints, amp, x_end, params.image_size).astype(np.float32)

    err = np.abs(flex - ideal)
    phase_dev = np.array([err[phase == p].mean() for p in range(3)])
    motion_dev = float(np.dot(JUDGE_PHASE_WEIGHTS, phase_dev))
    score = ideal_score(motion_dev, params.splash)
    if params.judge_noise > 0:
        score += rng.normal(0.0, params.judge_noise)
    score = float(np.clip(score, 0.0, S_MAX))
    keyframes = [d1, d1 + d2, d1 + d2 + d3]
    return DiveSample(frames, pose, keyframes, score, phase_dev, motion_dev)


def ideal_score(motion_deviation, splash):
    return S_MAX - C_ANGLE * motion_deviation - C_SPLASH * splash


def sample_dive_params(rng, difficulty=None, judge_noise=0.0, image_size=64):
    """Draw one dive's controls.  Execution quality and splash are independent."""
    if difficulty is None:
        difficulty = float(rng.choice(sorted(DIFFICULTY_SOMERSAULTS)))
    k = DIFFICULTY_SOMERSAULTS[difficulty]
    quality = rng.uniform(0.0, 1.0)
    dev = 0.6 * quality * rng.uniform(0.4, 1.0, size=(3, 4))
    return difficulty, DiveParams(
        takeoff_frames=int(rng.integers(10, 17)),
        turning_frames=int(rng.integers(16, 23)) + 3 * k,
        entry_frames=int(rng.integers(6, 11)),
        condition_frames=int(rng.integers(10, 17)),
        somersaults=k,
        angle_deviation=dev,
        wobble=float(rng.uniform(0.0, 0.25)),
        splash=float(rng.uniform(0.0, 1.0)),
        judge_noise=judge_noise,
        seed=int(rng.integers(0, 2**31 - 1)),
        image_size=image_size,
    )


def synth_corpus(n_train, n_test, seed, judge_noise=0.0, image_size=64):
    """Generate a seeded corpus as a list of io.Video, train items first.

    Every item draws from its own child seed, so item k is the same whatever
    the corpus size.
    """
    from .io import Video
    from .types import VideoItem

    children = np.random.SeedSequence(seed).spawn(n_train + n_test)
    videos = []
    for k, child in enumerate(children):
        rng = np.random.default_rng(child)
        difficulty, params = sample_dive_params(rng, judge_noise=judge_noise, image_size=image_size)
        s = synth_dive(params)
        item = VideoItem(
            id=f"dive_{k:05d}", difficulty=difficulty, score=s.score, gt_keyframes=s.gt_keyframes,
            pose_path="", frames_path="", num_frames=len(s.pose),
            split="train" if k < n_train else "test",
            truth={"motion_deviation": s.motion_deviation,
                   "phase_deviation": s.phase_deviation.tolist(), "splash": params.splash},
        )
        videos.append(Video(item, s.pose, s.frames))
    return videos


def corpus_metadata(judge_noise, image_size):
    return {"c_a": C_ANGLE, "c_s": C_SPLASH, "judge_noise": judge_noise, "image_size": image_size,
            "judge_phase_weights": list(JUDGE_PHASE_WEIGHTS)}
