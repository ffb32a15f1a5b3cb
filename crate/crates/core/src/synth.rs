//! Synthetic adoption logs, follower networks, and geo labels with planted
//! community structure. Every end-to-end test that needs ground truth about
//! who "should" embed near whom builds on this generator.
//!
//! Adoption draws and follow draws come from separate derived RNG streams,
//! so changing the network wiring never perturbs the adoption log.

use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Exp};

use crate::error::{Error, Result};
use crate::ingest::{
    write_adoption_log, AdoptionEvent, AdoptionSequence, FollowerNetwork, GeoLabels,
};
use crate::rng::SeedDerive;

pub const ADOPTIONS_FILE: &str = "adoptions.tsv";
pub const FOLLOWS_FILE: &str = "follows.tsv";
pub const GEO_FILE: &str = "geo.tsv";

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub num_communities: usize,
    pub users_per_community: usize,
    /// Topics homed in each community.
    pub topics_per_community: usize,
    /// Probability that an adopter is drawn from outside the home community.
    pub cross_community_noise: f64,
    /// Adopter count per topic, uniform in [min, max].
    pub adopters_min: usize,
    pub adopters_max: usize,
    /// Mean of the exponential inter-adoption gap, in seconds.
    pub mean_gap_seconds: f64,
    pub follows_per_user: usize,
    /// Probability that a follow edge leaves the follower's community.
    pub follow_cross_fraction: f64,
    pub rng_seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            num_communities: 5,
            users_per_community: 40,
            topics_per_community: 80,
            cross_community_noise: 0.05,
            adopters_min: 20,
            adopters_max: 30,
            mean_gap_seconds: 600.0,
            follows_per_user: 10,
            follow_cross_fraction: 0.05,
            rng_seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_communities < 2 {
            return Err(Error::InvalidConfig("need at least 2 communities".into()));
        }
        if self.users_per_community == 0 || self.topics_per_community == 0 {
            return Err(Error::InvalidConfig(
                "users and topics per community must be positive".into(),
            ));
        }
        if !(0.0..0.5).contains(&self.cross_community_noise) {
            return Err(Error::InvalidConfig(format!(
                "cross-community noise must be in [0, 0.5), got {}",
                self.cross_community_noise
            )));
        }
        if self.adopters_min < 1 || self.adopters_min > self.adopters_max {
            return Err(Error::InvalidConfig(
                "adopter range must satisfy 1 <= min <= max".into(),
            ));
        }
        if self.adopters_max > self.users_per_community {
            return Err(Error::InvalidConfig(format!(
                "adopters_max {} exceeds community size {}",
                self.adopters_max, self.users_per_community
            )));
        }
        if !(self.mean_gap_seconds > 0.0) {
            return Err(Error::InvalidConfig(
                "mean adoption gap must be positive".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.follow_cross_fraction) {
            return Err(Error::InvalidConfig(
                "follow cross fraction must be in [0, 1]".into(),
            ));
        }
        if self.follows_per_user >= self.users_per_community {
            return Err(Error::InvalidConfig(format!(
                "follows_per_user {} must be below community size {}",
                self.follows_per_user, self.users_per_community
            )));
        }
        Ok(())
    }

    pub fn total_users(&self) -> usize {
        self.num_communities * self.users_per_community
    }

    pub fn total_topics(&self) -> usize {
        self.num_communities * self.topics_per_community
    }
}

/// The generated instance plus its planted ground truth.
#[derive(Debug, Clone)]
pub struct SynthData {
    pub sequences: Vec<AdoptionSequence>,
    pub network: FollowerNetwork,
    pub geo: GeoLabels,
    /// user -> planted community index.
    pub communities: BTreeMap<String, usize>,
}

impl SynthData {
    /// Emit the three ingest formats into `dir` under the conventional
    /// file names.
    pub fn write_to_dir(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_adoption_log(&self.sequences, dir.join(ADOPTIONS_FILE))?;
        self.network.save(dir.join(FOLLOWS_FILE))?;
        self.geo.save(dir.join(GEO_FILE))
    }
}

fn user_id(community: usize, index: usize) -> String {
    format!("c{community:02}u{index:03}")
}

fn topic_id(index: usize) -> String {
    format!("t{index:04}")
}

fn geo_label(community: usize) -> String {
    format!("z{community:02}")
}

/// Draw a user index: from `home` with probability 1 - noise, otherwise
/// uniformly from the other communities.
fn draw_user(cfg: &SynthConfig, home: usize, rng: &mut impl Rng) -> (usize, usize) {
    let community = if cfg.cross_community_noise > 0.0 && rng.gen_bool(cfg.cross_community_noise) {
        let mut other = rng.gen_range(0..cfg.num_communities - 1);
        if other >= home {
            other += 1;
        }
        other
    } else {
        home
    };
    (community, rng.gen_range(0..cfg.users_per_community))
}

pub fn generate(cfg: &SynthConfig) -> Result<SynthData> {
    cfg.validate()?;
    let gap = Exp::new(1.0 / cfg.mean_gap_seconds).expect("validated positive mean");

    let mut sequences = Vec::with_capacity(cfg.total_topics());
    for t in 0..cfg.total_topics() {
        let home = t / cfg.topics_per_community;
        let mut rng = SeedDerive::new(cfg.rng_seed)
            .text("synth-adopt")
            .index(t as u64)
            .rng();
        let count = rng.gen_range(cfg.adopters_min..=cfg.adopters_max);
        // adopters stay distinct within a topic; order is adoption order
        let mut adopters: Vec<(usize, usize)> = Vec::with_capacity(count);
        while adopters.len() < count {
            let candidate = draw_user(cfg, home, &mut rng);
            if !adopters.contains(&candidate) {
                adopters.push(candidate);
            }
        }
        let topic = topic_id(t);
        let mut time = 0.0_f64;
        let events = adopters
            .into_iter()
            .map(|(c, u)| {
                time += gap.sample(&mut rng);
                AdoptionEvent {
                    topic_id: topic.clone(),
                    user_id: user_id(c, u),
                    timestamp: time.round() as i64,
                }
            })
            .collect();
        sequences.push(AdoptionSequence {
            topic_id: topic,
            events,
        });
    }

    let mut network = FollowerNetwork::new();
    for c in 0..cfg.num_communities {
        for u in 0..cfg.users_per_community {
            let follower = user_id(c, u);
            let mut rng = SeedDerive::new(cfg.rng_seed)
                .text("synth-follow")
                .index((c * cfg.users_per_community + u) as u64)
                .rng();
            let mut followed = 0;
            while followed < cfg.follows_per_user {
                let (fc, fu) =
                    if cfg.follow_cross_fraction > 0.0 && rng.gen_bool(cfg.follow_cross_fraction) {
                        let mut other = rng.gen_range(0..cfg.num_communities - 1);
                        if other >= c {
                            other += 1;
                        }
                        (other, rng.gen_range(0..cfg.users_per_community))
                    } else {
                        (c, rng.gen_range(0..cfg.users_per_community))
                    };
                let followee = user_id(fc, fu);
                if followee != follower
                    && network.add_edge(&follower, &followee) == crate::ingest::EdgeInsert::Added
                {
                    followed += 1;
                }
            }
        }
    }

    let mut geo = GeoLabels::new();
    let mut communities = BTreeMap::new();
    for c in 0..cfg.num_communities {
        for u in 0..cfg.users_per_community {
            let user = user_id(c, u);
            geo.insert(&user, &geo_label(c));
            communities.insert(user, c);
        }
    }

    Ok(SynthData {
        sequences,
        network,
        geo,
        communities,
    })
}
