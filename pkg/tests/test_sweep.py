import json
import math
import random

import pytest

from stylesteer import (
    MetricsError,
    ReferenceBaseLM,
    SteeringConfig,
    SweepConfig,
    SweepError,
    build_lexicon,
    build_prior,
    build_vocabulary,
    cell_seed,
    evaluate_external,
    pareto_frontier,
    prompt_prefix_mode,
    reservoir_sample_lines,
    run_sweep,
    tokenize,
)
from stylesteer.sampletext import chivalric_text, headline_text


@pytest.fixture()
def corpora_files(tmp_path):
    style_a = tmp_path / "archaic.txt"
    style_a.write_text(chivalric_text(2000, seed=1), encoding="utf-8")
    style_b = tmp_path / "news.txt"
    style_b.write_text(headline_text(2000, seed=2), encoding="utf-8")
    base = tmp_path / "base.txt"
    base.write_text(chivalric_text(1500, seed=3) + "\n" + headline_text(1500, seed=4),
                    encoding="utf-8")
    return style_a, style_b, base


def small_config(tmp_path, corpora_files, **overrides) -> SweepConfig:
    style_a, style_b, base = corpora_files
    defaults = dict(
        corpora=(("archaic", str(style_a)), ("news", str(style_b))),
        out_dir=str(tmp_path / "out"),
        provider=f"ref:{base}",
        lambda_grid=(0.0, 0.5, 1.0),
        prompts=("the noble knight", "markets", "a c d", "one more prompt"),
        decode=SteeringConfig(max_new_tokens=8),
        run_seed=77,
    )
    defaults.update(overrides)
    return SweepConfig(**defaults)


class TestParetoFrontier:
    def brute_force(self, points):
        out = []
        for i, (li, bi, si) in enumerate(points):
            dominated = False
            for j, (lj, bj, sj) in enumerate(points):
                if i == j:
                    continue
                if bj <= bi and sj <= si and (bj < bi or sj < si):
                    dominated = True
                    break
            if not dominated:
                out.append((li, bi, si))
        out.sort(key=lambda p: (p[1], p[2], p[0]))
        return out

    def test_singleton(self):
        assert pareto_frontier([(0.3, 5.0, 7.0)]) == [(0.3, 5.0, 7.0)]

    def test_dominating_pair(self):
        points = [(0.0, 43.4, 4751.3), (0.1, 21.1, 3577.7)]
        assert pareto_frontier(points) == [(0.1, 21.1, 3577.7)]

    def test_three_way_tradeoff(self):
        points = [(0.0, 1.0, 9.0), (0.5, 5.0, 5.0), (1.0, 9.0, 1.0)]
        assert pareto_frontier(points) == self.brute_force(points)
        assert len(pareto_frontier(points)) == 3

    def test_sorted_by_base_ppl(self):
        rng = random.Random(6)
        points = [(rng.random(), rng.uniform(1, 50), rng.uniform(1, 50))
                  for _ in range(60)]
        frontier = pareto_frontier(points)
        bases = [b for _, b, _ in frontier]
        assert bases == sorted(bases)

    def test_matches_brute_force_oracle(self):
        rng = random.Random(8)
        for _ in range(100):
            n = rng.randint(1, 60)
            points = [
                (
                    rng.random(),
                    rng.choice((1.0, 2.0, 3.0, rng.uniform(0, 10))),
                    rng.choice((1.0, 2.0, 3.0, rng.uniform(0, 10))),
                )
                for _ in range(n)
            ]
            assert pareto_frontier(points) == self.brute_force(points)

    def test_duplicates_all_kept(self):
        points = [(0.1, 2.0, 3.0), (0.2, 2.0, 3.0)]
        assert len(pareto_frontier(points)) == 2

    def test_non_finite_rejected(self):
        with pytest.raises(SweepError):
            pareto_frontier([(0.0, math.inf, 1.0)])


class TestSeeding:
    def test_cell_seed_depends_on_all_coordinates(self):
        base = cell_seed(7, "c", 0.5, 3)
        assert cell_seed(8, "c", 0.5, 3) != base
        assert cell_seed(7, "d", 0.5, 3) != base
        assert cell_seed(7, "c", 0.55, 3) != base
        assert cell_seed(7, "c", 0.5, 4) != base
        assert cell_seed(7, "c", 0.5, 3) == base

    def test_reservoir_sampling_deterministic(self):
        text = "\n".join(f"line {i}" for i in range(1000))
        a = reservoir_sample_lines(text, 50, seed=3)
        b = reservoir_sample_lines(text, 50, seed=3)
        c = reservoir_sample_lines(text, 50, seed=4)
        assert a == b
        assert a != c
        assert len(a.splitlines()) == 50

    def test_reservoir_keeps_all_when_small(self):
        text = "x\ny\nz"
        assert reservoir_sample_lines(text, 10, seed=0) == text


class TestRunSweep:
    def test_cardinality(self, tmp_path, corpora_files):
        config = small_config(
            tmp_path,
            corpora_files,
            corpora=(("archaic", str(corpora_files[0])),),
            lambda_grid=(0.0, 1.0),
            prompts=("the knight", "a squire"),
        )
        report = run_sweep(config)
        assert len(report.rows) == 1 * 2 * 2
        assert all(r["status"] == "ok" for r in report.rows)

    def test_lambda_zero_rows_have_zero_jsd(self, tmp_path, corpora_files):
        config = small_config(tmp_path, corpora_files, lambda_grid=(0.0,))
        report = run_sweep(config)
        assert all(abs(r["mean_jsd_bits"]) < 1e-9 for r in report.rows)

    def test_resume_matches_uninterrupted(self, tmp_path, corpora_files):
        config_a = small_config(tmp_path, corpora_files,
                                out_dir=str(tmp_path / "straight"))
        run_sweep(config_a)
        straight = (tmp_path / "straight" / "rows.csv").read_bytes()

        config_b = small_config(tmp_path, corpora_files,
                                out_dir=str(tmp_path / "resumed"))

        class Kill(Exception):
            pass

        seen = {"n": 0}

        def killer(row):
            seen["n"] += 1
            if seen["n"] == 5:
                raise Kill()

        with pytest.raises(Kill):
            run_sweep(config_b, on_cell=killer)
        report = run_sweep(config_b)
        resumed = (tmp_path / "resumed" / "rows.csv").read_bytes()
        assert resumed == straight
        assert len(report.rows) == 2 * 3 * 4

    def test_worker_pool_matches_serial(self, tmp_path, corpora_files):
        serial = small_config(tmp_path, corpora_files,
                              out_dir=str(tmp_path / "serial"))
        threaded = small_config(tmp_path, corpora_files,
                                out_dir=str(tmp_path / "threaded"), workers=4)
        run_sweep(serial)
        run_sweep(threaded)
        assert (tmp_path / "serial" / "rows.csv").read_bytes() == (
            tmp_path / "threaded" / "rows.csv"
        ).read_bytes()

    def test_failed_cells_do_not_abort(self, tmp_path, corpora_files):
        # An empty prompt tokenizes to nothing and fails its cells; the
        # remaining cells still complete and the failure lands in the row.
        config = small_config(
            tmp_path, corpora_files,
            lambda_grid=(0.0,),
            prompts=("the knight", ""),
        )
        report = run_sweep(config)
        by_prompt = {r["prompt_id"]: r for r in report.rows
                     if r["corpus"] == "archaic"}
        assert by_prompt[0]["status"] == "ok"
        assert by_prompt[1]["status"] == "failed"
        assert "nothing" in by_prompt[1]["error"]
        assert by_prompt[1]["style_ppl"] is None

    def test_fatal_config_errors(self, tmp_path, corpora_files):
        with pytest.raises(SweepError):
            run_sweep(small_config(tmp_path, corpora_files, corpora=()))
        with pytest.raises(SweepError):
            run_sweep(small_config(tmp_path, corpora_files, lambda_grid=()))
        with pytest.raises(SweepError):
            run_sweep(small_config(tmp_path, corpora_files, lambda_grid=(2.0,)))
        with pytest.raises(SweepError):
            run_sweep(
                small_config(
                    tmp_path,
                    corpora_files,
                    corpora=(("missing", str(tmp_path / "nope.txt")),),
                )
            )

    def test_remote_provider_matches_reference(self, tmp_path, corpora_files):
        # The same base model behind the wire protocol must reproduce the
        # in-process sweep byte for byte, including with a worker pool.
        from stylesteer import ProviderServer
        from stylesteer.tokenizer import build_vocabulary as bv

        style_a, style_b, base = corpora_files
        local = small_config(tmp_path, corpora_files,
                             out_dir=str(tmp_path / "local"))
        run_sweep(local)

        texts = [p.read_text(encoding="utf-8") for p in (base, style_a, style_b)]
        vocab = bv("\n".join(texts), max_vocab=65536)
        lm = ReferenceBaseLM(tokenize(texts[0], vocab, source="base"))
        server = ProviderServer(lm)
        server.start()
        try:
            remote = small_config(
                tmp_path, corpora_files,
                out_dir=str(tmp_path / "remote"),
                provider=f"remote:{server.address}",
                workers=3,
            )
            # remote sweeps need the shared vocabulary spelled out
            import dataclasses

            vocab_path = tmp_path / "shared.vocab"
            from stylesteer import save_vocab_file

            save_vocab_file(vocab, vocab_path)
            remote = dataclasses.replace(remote, vocab_path=str(vocab_path))
            run_sweep(remote)
        finally:
            server.stop()
        assert (tmp_path / "local" / "rows.csv").read_bytes() == (
            tmp_path / "remote" / "rows.csv"
        ).read_bytes()

    def test_from_json(self, tmp_path, corpora_files):
        style_a, style_b, base = corpora_files
        payload = {
            "corpora": [{"name": "archaic", "path": str(style_a)}],
            "out_dir": str(tmp_path / "o"),
            "provider": f"ref:{base}",
            "lambda_grid": [0.0, 0.25],
            "prompts": ["the knight rode"],
            "decode": {"mode": "topp", "top_p": 0.9, "max_new_tokens": 6},
            "seed": 5,
        }
        path = tmp_path / "sweep.json"
        path.write_text(json.dumps(payload), encoding="utf-8")
        config = SweepConfig.from_json(path)
        assert config.decode.mode == "top-p"
        assert config.lambda_grid == (0.0, 0.25)
        report = run_sweep(config)
        assert len(report.rows) == 2


class TestPromptPrefixMode:
    def test_empty_instruction_matches_plain_rows(self, tmp_path, corpora_files):
        config = small_config(tmp_path, corpora_files, lambda_grid=(0.0,))
        plain = run_sweep(config)
        prefixed = prompt_prefix_mode(config, "")
        plain_zero = [r for r in plain.rows if r["lambda"] == 0.0]
        for a, b in zip(
            sorted(prefixed, key=lambda r: (r["corpus"], r["prompt_id"])),
            sorted(plain_zero, key=lambda r: (r["corpus"], r["prompt_id"])),
        ):
            assert a["text"] == b["text"]
            assert a["style_ppl"] == b["style_ppl"]

    def test_instruction_changes_prompt_not_length(self, tmp_path, corpora_files):
        config = small_config(tmp_path, corpora_files)
        rows = prompt_prefix_mode(config, "write like a noble herald of old")
        assert all(r["lambda"] == 0.0 for r in rows)
        assert all(r["T"] == config.decode.max_new_tokens for r in rows
                   if r["status"] == "ok")

    def test_deterministic(self, tmp_path, corpora_files):
        config = small_config(tmp_path, corpora_files)
        a = prompt_prefix_mode(config, "speak thusly")
        b = prompt_prefix_mode(config, "speak thusly")
        assert a == b


class TestEvaluateExternal:
    def make_pipeline(self, tmp_path):
        style_text = chivalric_text(3000, seed=11)
        base_text = headline_text(3000, seed=12)
        vocab = build_vocabulary(style_text + "\n" + base_text, max_vocab=4096)
        style_corpus = tokenize(style_text, vocab, source="style")
        prior = build_prior(style_corpus)
        lexicon = build_lexicon(style_corpus)
        provider = ReferenceBaseLM(tokenize(base_text, vocab, source="base"))
        return style_text, vocab, prior, lexicon, provider

    def test_own_corpus_beats_random_tokens(self, tmp_path):
        style_text, vocab, prior, lexicon, provider = self.make_pipeline(tmp_path)
        own = tmp_path / "own.txt"
        own_ids = tokenize(style_text, vocab).ids[:256]
        own.write_text(
            " ".join(vocab.token_of(i) for i in own_ids), encoding="utf-8"
        )
        rng = random.Random(13)
        rand = tmp_path / "rand.txt"
        rand.write_text(
            " ".join(
                vocab.token_of(rng.randrange(2, vocab.size)) for _ in range(256)
            ),
            encoding="utf-8",
        )
        own_report = evaluate_external(own, prior, lexicon, provider, vocab)
        rand_report = evaluate_external(rand, prior, lexicon, provider, vocab)
        assert own_report.style_ppl < rand_report.style_ppl

    def test_empty_file_rejected(self, tmp_path):
        _, vocab, prior, lexicon, provider = self.make_pipeline(tmp_path)
        empty = tmp_path / "empty.txt"
        empty.write_text("", encoding="utf-8")
        with pytest.raises(MetricsError):
            evaluate_external(empty, prior, lexicon, provider, vocab)

    def test_matches_in_sweep_lambda_zero_row(self, tmp_path, corpora_files):
        config = small_config(tmp_path, corpora_files, lambda_grid=(0.0,),
                              prompts=("the noble knight",))
        report = run_sweep(config)
        row = report.rows[0]

        from stylesteer.sweep import SweepMaterials

        materials = SweepMaterials(config)
        text_file = tmp_path / "gen.txt"
        text_file.write_text(row["text"], encoding="utf-8")
        external = evaluate_external(
            text_file,
            materials.priors["archaic"],
            materials.lexicons["archaic"],
            materials.provider(),
            materials.vocab,
            prompt="the noble knight",
        )
        assert external.style_ppl == pytest.approx(row["style_ppl"], rel=1e-12)
        assert external.base_ppl == pytest.approx(row["base_ppl"], rel=1e-12)
        assert external.mean_jsd_bits == row["mean_jsd_bits"] == 0.0
        assert external.unigram_overlap == row["unigram_overlap"]
        assert external.bigram_seen == row["bigram_seen"]
