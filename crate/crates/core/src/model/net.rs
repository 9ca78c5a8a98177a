//! The forecaster network: two multi-input embeddings, rally and player
//! encoder stacks, and a decoder whose blocks fuse the rally and player
//! streams through a position-aware gate.

use indexmap::IndexMap;
use rand_chacha::ChaCha8Rng;

use super::config::{param_count, ModelConfig, VocabSizes};
use super::input::StrokeIds;
use super::pos;
use crate::autodiff::{Graph, ParamSet, Tensor, Var};
use crate::{seeds, Error, Result};

const LN_EPS: f64 = 1e-5;
const MASK_OFF: f64 = -1e30;
const SIGMA_FLOOR: f64 = 1e-6;
const RHO_SCALE: f64 = 0.99;

/// Model parameters plus the configuration they were built for.
#[derive(Debug, Clone)]
pub struct Model {
    config: ModelConfig,
    vocab: VocabSizes,
    pub params: ParamSet,
}

/// Encoder outputs the decoder attends to: the rally stream and one
/// stream per player, index 0 being the server.
#[derive(Debug, Clone, Copy)]
pub struct Memories {
    pub rally: Var,
    pub players: [Var; 2],
}

/// Bivariate-Gaussian landing parameters, one row per decoded step.
#[derive(Debug, Clone, Copy)]
pub struct AreaParams {
    pub mu_x: Var,
    pub mu_y: Var,
    pub sigma_x: Var,
    pub sigma_y: Var,
    pub rho: Var,
}

/// Per-step head outputs; logits have one row per decoded step.
#[derive(Debug, Clone, Copy)]
pub struct HeadVars {
    pub shot_logits: Var,
    pub area: AreaParams,
    pub aroundhead_logits: Var,
    pub backhand_logits: Var,
    pub height_logits: Var,
    pub player_loc_logits: Var,
    pub opponent_loc_logits: Var,
}

impl Model {
    /// Builds a model with freshly initialized parameters. Tables and
    /// affine maps are uniform in `(-1/sqrt(d), 1/sqrt(d))`; layer-norm
    /// gains start at one and biases at zero.
    pub fn new(config: ModelConfig, vocab: VocabSizes, seed: u64) -> Result<Model> {
        config.validate()?;
        vocab.validate()?;
        let mut rng = seeds::stream(seed, "init");
        let d = config.dim;
        let f = config.ff_hidden();
        let bound = 1.0 / (d as f64).sqrt();
        let mut params = ParamSet::new();

        let mut table = |params: &mut ParamSet, name: &str, rows: usize, cols: usize| {
            params.insert(
                name,
                Tensor::uniform(vec![rows, cols], -bound, bound, &mut rng),
            );
        };
        let ln = |params: &mut ParamSet, prefix: &str| {
            params.insert(format!("{prefix}.g"), Tensor::new(vec![1, d], vec![1.0; d]));
            params.insert(format!("{prefix}.b"), Tensor::zeros(vec![1, d]));
        };

        for (name, rows) in [
            ("emb1.shot_type", vocab.shot_type),
            ("emb1.aroundhead", vocab.aroundhead),
            ("emb1.backhand", vocab.backhand),
            ("emb1.height", vocab.landing_height),
            ("emb1.player_loc", vocab.player_location),
            ("emb1.opponent_loc", vocab.opponent_location),
            ("emb1.player", vocab.player),
        ] {
            table(&mut params, name, rows, d);
        }
        table(&mut params, "emb2.coord.w", 2, d);
        table(&mut params, "emb2.coord.b", 1, d);
        for (name, rows) in [
            ("emb2.aroundhead", vocab.aroundhead),
            ("emb2.backhand", vocab.backhand),
            ("emb2.height", vocab.landing_height),
            ("emb2.player_loc", vocab.player_location),
            ("emb2.opponent_loc", vocab.opponent_location),
            ("emb2.player", vocab.player),
        ] {
            table(&mut params, name, rows, d);
        }

        let attn = |params: &mut ParamSet, rng: &mut ChaCha8Rng, prefix: &str| {
            for part in ["wq", "wk", "wv", "wo"] {
                params.insert(
                    format!("{prefix}.{part}"),
                    Tensor::uniform(vec![d, d], -bound, bound, rng),
                );
                let bias = part.replace('w', "b");
                params.insert(
                    format!("{prefix}.{bias}"),
                    Tensor::uniform(vec![1, d], -bound, bound, rng),
                );
            }
        };
        let ff = |params: &mut ParamSet, rng: &mut ChaCha8Rng, prefix: &str| {
            params.insert(
                format!("{prefix}.w1"),
                Tensor::uniform(vec![d, f], -bound, bound, rng),
            );
            params.insert(
                format!("{prefix}.b1"),
                Tensor::uniform(vec![1, f], -bound, bound, rng),
            );
            params.insert(
                format!("{prefix}.w2"),
                Tensor::uniform(vec![f, d], -bound, bound, rng),
            );
            params.insert(
                format!("{prefix}.b2"),
                Tensor::uniform(vec![1, d], -bound, bound, rng),
            );
        };

        for stack in ["renc", "penc"] {
            for l in 0..config.layers {
                let p = format!("{stack}.{l}");
                ln(&mut params, &format!("{p}.ln1"));
                attn(&mut params, &mut rng, &format!("{p}.attn"));
                ln(&mut params, &format!("{p}.ln2"));
                ff(&mut params, &mut rng, &format!("{p}.ff"));
            }
        }
        for l in 0..config.layers {
            let p = format!("dec.{l}");
            ln(&mut params, &format!("{p}.ln1"));
            attn(&mut params, &mut rng, &format!("{p}.self"));
            ln(&mut params, &format!("{p}.ln2"));
            attn(&mut params, &mut rng, &format!("{p}.cross_rally"));
            attn(&mut params, &mut rng, &format!("{p}.cross_player"));
            params.insert(
                format!("{p}.gate.w"),
                Tensor::uniform(vec![3 * d, d], -bound, bound, &mut rng),
            );
            params.insert(
                format!("{p}.gate.b"),
                Tensor::uniform(vec![1, d], -bound, bound, &mut rng),
            );
            ln(&mut params, &format!("{p}.ln3"));
            ff(&mut params, &mut rng, &format!("{p}.ff"));
        }
        ln(&mut params, "final_ln");
        for (name, width) in [
            ("head.shot_type", vocab.shot_type),
            ("head.area", 5),
            ("head.aroundhead", vocab.aroundhead),
            ("head.backhand", vocab.backhand),
            ("head.height", vocab.landing_height),
            ("head.player_loc", vocab.player_location),
            ("head.opponent_loc", vocab.opponent_location),
        ] {
            params.insert(
                format!("{name}.w"),
                Tensor::uniform(vec![d, width], -bound, bound, &mut rng),
            );
            params.insert(
                format!("{name}.b"),
                Tensor::uniform(vec![1, width], -bound, bound, &mut rng),
            );
        }

        debug_assert_eq!(params.value_count(), param_count(&config, &vocab));
        Ok(Model {
            config,
            vocab,
            params,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn vocab_sizes(&self) -> &VocabSizes {
        &self.vocab
    }

    /// Starts a forward pass: a fresh tape with every parameter as a leaf.
    pub fn forward(&self) -> Forward<'_> {
        let mut graph = Graph::new();
        let vars = self.params.leaf_map(&mut graph);
        Forward {
            model: self,
            graph,
            vars,
        }
    }
}

/// One forward pass over a fresh tape. Training uses `encode_sequences`
/// followed by `decode`, reads gradients off the tape, and drops the pass.
pub struct Forward<'m> {
    model: &'m Model,
    pub graph: Graph,
    vars: IndexMap<String, Var>,
}

impl<'m> Forward<'m> {
    pub fn param_vars(&self) -> &IndexMap<String, Var> {
        &self.vars
    }

    /// Splits the pass into its tape and parameter map, releasing the
    /// borrow on the model so gradients can be written back.
    pub fn into_parts(self) -> (Graph, IndexMap<String, Var>) {
        (self.graph, self.vars)
    }

    fn p(&self, name: &str) -> Var {
        match self.vars.get(name) {
            Some(&v) => v,
            None => panic!("unknown parameter {name:?}"),
        }
    }

    /// Sum of the seven type-1 embedding lookups, shape `(n, d)`.
    pub fn encode_type1(&mut self, strokes: &[StrokeIds]) -> Var {
        let lookups: [(&str, Vec<usize>); 7] = [
            ("emb1.shot_type", strokes.iter().map(|s| s.shot_type).collect()),
            ("emb1.aroundhead", strokes.iter().map(|s| s.aroundhead).collect()),
            ("emb1.backhand", strokes.iter().map(|s| s.backhand).collect()),
            ("emb1.height", strokes.iter().map(|s| s.height).collect()),
            ("emb1.player_loc", strokes.iter().map(|s| s.player_loc).collect()),
            (
                "emb1.opponent_loc",
                strokes.iter().map(|s| s.opponent_loc).collect(),
            ),
            ("emb1.player", strokes.iter().map(|s| s.player).collect()),
        ];
        let mut out = None;
        for (name, ids) in &lookups {
            let t = self.p(name);
            let e = self.graph.embedding(t, ids);
            out = Some(match out {
                None => e,
                Some(acc) => self.graph.add(acc, e),
            });
        }
        out.expect("at least one lookup")
    }

    /// Affine map of the landing point summed with the six type-2 context
    /// embeddings, shape `(n, d)`.
    pub fn encode_type2(&mut self, strokes: &[StrokeIds]) -> Var {
        let mut coords = Vec::with_capacity(strokes.len() * 2);
        for s in strokes {
            coords.push(s.x);
            coords.push(s.y);
        }
        let coords = self
            .graph
            .constant(Tensor::new(vec![strokes.len(), 2], coords));
        let w = self.p("emb2.coord.w");
        let b = self.p("emb2.coord.b");
        let projected = self.graph.matmul(coords, w);
        let mut out = self.graph.add_row(projected, b);

        let lookups: [(&str, Vec<usize>); 6] = [
            ("emb2.aroundhead", strokes.iter().map(|s| s.aroundhead).collect()),
            ("emb2.backhand", strokes.iter().map(|s| s.backhand).collect()),
            ("emb2.height", strokes.iter().map(|s| s.height).collect()),
            ("emb2.player_loc", strokes.iter().map(|s| s.player_loc).collect()),
            (
                "emb2.opponent_loc",
                strokes.iter().map(|s| s.opponent_loc).collect(),
            ),
            ("emb2.player", strokes.iter().map(|s| s.player).collect()),
        ];
        for (name, ids) in &lookups {
            let t = self.p(name);
            let e = self.graph.embedding(t, ids);
            out = self.graph.add(out, e);
        }
        out
    }

    /// Full input representation: type 1 + type 2 + sinusoidal encoding of
    /// each stroke's original position.
    pub fn embed_strokes(&mut self, strokes: &[StrokeIds]) -> Var {
        let type1 = self.encode_type1(strokes);
        let type2 = self.encode_type2(strokes);
        let summed = self.graph.add(type1, type2);
        let positions: Vec<usize> = strokes.iter().map(|s| s.position).collect();
        let encoding = pos::encoding_matrix(&positions, self.model.config.dim);
        let encoding = self.graph.constant(encoding);
        self.graph.add(summed, encoding)
    }

    fn dropout(&mut self, x: Var, rng: &mut Option<&mut ChaCha8Rng>) -> Var {
        let rate = self.model.config.dropout;
        let Some(rng) = rng.as_deref_mut() else {
            return x;
        };
        if rate == 0.0 {
            return x;
        }
        use rand::Rng;
        let shape = self.graph.value(x).shape().to_vec();
        let count = shape.iter().product();
        let keep_scale = 1.0 / (1.0 - rate);
        let data: Vec<f64> = (0..count)
            .map(|_| {
                if rng.random::<f64>() < rate {
                    0.0
                } else {
                    keep_scale
                }
            })
            .collect();
        let mask = self.graph.constant(Tensor::new(shape, data));
        self.graph.mul(x, mask)
    }

    fn layer_norm(&mut self, prefix: &str, x: Var) -> Var {
        let gain = self.p(&format!("{prefix}.g"));
        let bias = self.p(&format!("{prefix}.b"));
        let normed = self.graph.layer_norm_rows(x, LN_EPS);
        let scaled = self.graph.mul_row(normed, gain);
        self.graph.add_row(scaled, bias)
    }

    fn affine(&mut self, prefix: &str, x: Var) -> Var {
        let w = self.p(&format!("{prefix}.w"));
        let b = self.p(&format!("{prefix}.b"));
        let projected = self.graph.matmul(x, w);
        self.graph.add_row(projected, b)
    }

    fn attention(&mut self, prefix: &str, q_in: Var, kv_in: Var, mask: Option<&Tensor>) -> Var {
        let d = self.model.config.dim;
        let heads = self.model.config.n_heads;
        let dh = d / heads;
        let scale = 1.0 / (dh as f64).sqrt();

        let q = self.affine_parts(prefix, "wq", "bq", q_in);
        let k = self.affine_parts(prefix, "wk", "bk", kv_in);
        let v = self.affine_parts(prefix, "wv", "bv", kv_in);

        let mut outputs = Vec::with_capacity(heads);
        for head in 0..heads {
            let qh = self.graph.slice_cols(q, head * dh, dh);
            let kh = self.graph.slice_cols(k, head * dh, dh);
            let vh = self.graph.slice_cols(v, head * dh, dh);
            let scores = self.graph.matmul_nt(qh, kh);
            let mut scores = self.graph.mul_scalar(scores, scale);
            if let Some(mask) = mask {
                let mask = self.graph.constant(mask.clone());
                scores = self.graph.add(scores, mask);
            }
            let weights = self.graph.softmax_rows(scores);
            outputs.push(self.graph.matmul(weights, vh));
        }
        let merged = self.graph.concat_cols(&outputs);
        let wo = self.p(&format!("{prefix}.wo"));
        let bo = self.p(&format!("{prefix}.bo"));
        let projected = self.graph.matmul(merged, wo);
        self.graph.add_row(projected, bo)
    }

    fn affine_parts(&mut self, prefix: &str, w: &str, b: &str, x: Var) -> Var {
        let w = self.p(&format!("{prefix}.{w}"));
        let b = self.p(&format!("{prefix}.{b}"));
        let projected = self.graph.matmul(x, w);
        self.graph.add_row(projected, b)
    }

    fn feed_forward(&mut self, prefix: &str, x: Var) -> Var {
        let hidden = self.affine_parts(prefix, "w1", "b1", x);
        let hidden = self.graph.relu(hidden);
        self.affine_parts(prefix, "w2", "b2", hidden)
    }

    fn encoder_stack(
        &mut self,
        stack: &str,
        mut x: Var,
        rng: &mut Option<&mut ChaCha8Rng>,
    ) -> Var {
        for l in 0..self.model.config.layers {
            let p = format!("{stack}.{l}");
            let normed = self.layer_norm(&format!("{p}.ln1"), x);
            let attended = self.attention(&format!("{p}.attn"), normed, normed, None);
            let attended = self.dropout(attended, rng);
            x = self.graph.add(x, attended);
            let normed = self.layer_norm(&format!("{p}.ln2"), x);
            let ff = self.feed_forward(&format!("{p}.ff"), normed);
            let ff = self.dropout(ff, rng);
            x = self.graph.add(x, ff);
        }
        x
    }

    /// Runs the rally encoder over the whole prefix and the shared player
    /// encoder over each player's own strokes (original positions kept).
    pub fn encode_sequences(
        &mut self,
        prefix: &[StrokeIds],
        rng: &mut Option<&mut ChaCha8Rng>,
    ) -> Result<Memories> {
        if prefix.is_empty() {
            return Err(Error::Config("cannot encode an empty prefix".into()));
        }
        let embedded = self.embed_strokes(prefix);
        let rally = self.encoder_stack("renc", embedded, rng);

        let mut players = Vec::with_capacity(2);
        for actor in 0..2 {
            let own: Vec<StrokeIds> = prefix
                .iter()
                .copied()
                .filter(|s| s.actor == actor)
                .collect();
            if own.is_empty() {
                return Err(Error::Config(format!(
                    "prefix has no strokes for player {actor}"
                )));
            }
            let embedded = self.embed_strokes(&own);
            players.push(self.encoder_stack("penc", embedded, rng));
        }
        Ok(Memories {
            rally,
            players: [players[0], players[1]],
        })
    }

    /// Decodes every step at once under causal masking. Row `j` predicts
    /// the stroke after `inputs[j]`, fusing the rally stream with the
    /// stream of the player who hits that next stroke.
    pub fn decode(
        &mut self,
        inputs: &[StrokeIds],
        memories: &Memories,
        rng: &mut Option<&mut ChaCha8Rng>,
    ) -> Result<HeadVars> {
        if inputs.is_empty() {
            return Err(Error::Config("decoder needs at least one input stroke".into()));
        }
        let m = inputs.len();
        let d = self.model.config.dim;

        let target_positions: Vec<usize> = inputs.iter().map(|s| s.position + 1).collect();
        let target_pos = pos::encoding_matrix(&target_positions, d);
        let target_pos = self.graph.constant(target_pos);
        let select0: Vec<f64> = target_positions
            .iter()
            .map(|&p| if p % 2 == 0 { 1.0 } else { 0.0 })
            .collect();
        let select1: Vec<f64> = select0.iter().map(|&s| 1.0 - s).collect();
        let select0 = self.graph.constant(Tensor::new(vec![m, 1], select0));
        let select1 = self.graph.constant(Tensor::new(vec![m, 1], select1));

        let mut causal = Tensor::zeros(vec![m, m]);
        for q in 0..m {
            for k in q + 1..m {
                causal.data_mut()[q * m + k] = MASK_OFF;
            }
        }

        let mut x = self.embed_strokes(inputs);
        for l in 0..self.model.config.layers {
            let p = format!("dec.{l}");
            let normed = self.layer_norm(&format!("{p}.ln1"), x);
            let attended = self.attention(&format!("{p}.self"), normed, normed, Some(&causal));
            let attended = self.dropout(attended, rng);
            x = self.graph.add(x, attended);

            let normed = self.layer_norm(&format!("{p}.ln2"), x);
            let h_rally = self.attention(&format!("{p}.cross_rally"), normed, memories.rally, None);
            let from_p0 =
                self.attention(&format!("{p}.cross_player"), normed, memories.players[0], None);
            let from_p1 =
                self.attention(&format!("{p}.cross_player"), normed, memories.players[1], None);
            let from_p0 = self.graph.mul_col(from_p0, select0);
            let from_p1 = self.graph.mul_col(from_p1, select1);
            let h_player = self.graph.add(from_p0, from_p1);

            let gate_in = self.graph.concat_cols(&[h_rally, h_player, target_pos]);
            let gate_w = self.p(&format!("{p}.gate.w"));
            let gate_b = self.p(&format!("{p}.gate.b"));
            let gate_z = self.graph.matmul(gate_in, gate_w);
            let gate_z = self.graph.add_row(gate_z, gate_b);
            let gate = self.graph.sigmoid(gate_z);
            let negated = self.graph.neg(gate);
            let complement = self.graph.add_scalar(negated, 1.0);
            let rally_part = self.graph.mul(gate, h_rally);
            let player_part = self.graph.mul(complement, h_player);
            let fused = self.graph.add(rally_part, player_part);
            let fused = self.dropout(fused, rng);
            x = self.graph.add(x, fused);

            let normed = self.layer_norm(&format!("{p}.ln3"), x);
            let ff = self.feed_forward(&format!("{p}.ff"), normed);
            let ff = self.dropout(ff, rng);
            x = self.graph.add(x, ff);
        }

        let x = self.layer_norm("final_ln", x);
        let shot_logits = self.affine("head.shot_type", x);
        let area_raw = self.affine("head.area", x);
        let mu_x = self.graph.slice_cols(area_raw, 0, 1);
        let mu_y = self.graph.slice_cols(area_raw, 1, 1);
        let sx_raw = self.graph.slice_cols(area_raw, 2, 1);
        let sx_soft = self.graph.softplus(sx_raw);
        let sigma_x = self.graph.add_scalar(sx_soft, SIGMA_FLOOR);
        let sy_raw = self.graph.slice_cols(area_raw, 3, 1);
        let sy_soft = self.graph.softplus(sy_raw);
        let sigma_y = self.graph.add_scalar(sy_soft, SIGMA_FLOOR);
        let rho_raw = self.graph.slice_cols(area_raw, 4, 1);
        let rho_tanh = self.graph.tanh(rho_raw);
        let rho = self.graph.mul_scalar(rho_tanh, RHO_SCALE);

        Ok(HeadVars {
            shot_logits,
            area: AreaParams {
                mu_x,
                mu_y,
                sigma_x,
                sigma_y,
                rho,
            },
            aroundhead_logits: self.affine("head.aroundhead", x),
            backhand_logits: self.affine("head.backhand", x),
            height_logits: self.affine("head.height", x),
            player_loc_logits: self.affine("head.player_loc", x),
            opponent_loc_logits: self.affine("head.opponent_loc", x),
        })
    }
}
