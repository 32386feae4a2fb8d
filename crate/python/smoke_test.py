"""Smoke test for the compiled extension.

Build and install it first, e.g.

    maturin build --release -m crates/python/Cargo.toml
    pip install target/wheels/combat_arena-*.whl

then run ``python python/smoke_test.py``.
"""

import math
import tempfile

import combat_arena_py as ca


def check_arena():
    arena = ca.Arena.standard()
    assert (arena.length, arena.width) == (8.1, 5.1)
    assert arena.obstacle_count == 9
    again = ca.Arena.from_spec(arena.spec_text())
    assert again.spec_text() == arena.spec_text()
    assert not arena.is_free(0.0, 0.0)


def check_episode():
    env = ca.CombatEnv()
    obs, info = env.reset({"level": 2, "VK1": 0.3}, seed=4)
    assert len(obs) == ca.N_AGENTS and all(len(o) == ca.OBS_DIM for o in obs)
    assert info["level"] == "middle"
    assert math.isclose(info["dynamics"]["mu_slide"], 0.3)
    total, steps, done = 0.0, 0, False
    while not done:
        obs, reward, done, info = env.step(env.bot_actions("red", "hard"))
        total += reward
        steps += 1
    assert steps <= 50 and env.done
    assert info["verdict"] in ("red_wins", "blue_wins", "draw")
    try:
        env.step([0, 0])
    except ValueError:
        pass
    else:
        raise AssertionError("stepping a finished episode must fail")
    try:
        env.reset({"warp_drive": 1.0})
    except ValueError:
        pass
    else:
        raise AssertionError("unknown context keys must be rejected")
    print(f"episode: {steps} steps, return {total:.2f}, verdict {info['verdict']}")


def check_training():
    with tempfile.TemporaryDirectory() as out:
        summary = ca.train("qmix", "easy", steps=300, seed=1, eval_episodes=2, out_dir=out)
        assert summary["env_steps"] >= 300
        policy = ca.Policy.load(f"{out}/checkpoint.bin")
        assert policy.algo == "qmix"
        env = ca.CombatEnv()
        obs, _ = env.reset(seed=2)
        acts = policy.act(obs)
        assert len(acts) == 2 and all(0 <= a < ca.N_ACTIONS for a in acts)
        result = ca.evaluate(f"{out}/checkpoint.bin", level="easy", episodes=3)
        assert 0.0 <= result["win_rate"] <= 1.0
        print(f"training: {summary['env_steps']} steps, eval win rate {result['win_rate']:.2f}")


def main():
    assert 0.0 < ca.hit_probability(3.0) < ca.hit_probability(0.5) <= 1.0
    assert "VK1" in ca.context_keys()
    check_arena()
    check_episode()
    check_training()
    print("smoke test passed")


if __name__ == "__main__":
    main()
