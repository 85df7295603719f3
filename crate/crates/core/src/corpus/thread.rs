use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};

use chrono::{DateTime, Utc};

use super::Corpus;

/// A reply thread rooted at a starter tweet, ordered so that every reply
/// follows the tweet it answers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Conversation {
    pub starter: String,
    pub tweets: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Threads {
    pub conversations: Vec<Conversation>,
    /// Tweets whose reply chain never reaches a root inside the corpus
    /// (missing parent or a cycle).
    pub dangling: Vec<String>,
}

type Key = (Option<DateTime<Utc>>, String);

/// Groups tweets into reply threads.
///
/// Starters are tweets without `reply_to` that receive at least one reply;
/// isolated tweets form no conversation. The result depends only on tweet
/// ids, timestamps and reply links, never on record order.
pub fn thread_conversations(corpus: &Corpus) -> Threads {
    let tweets = corpus.tweets();
    let n = tweets.len();

    // 0 = unknown, 1 = visiting, 2 = rooted, 3 = dangling
    let mut state = vec![0u8; n];
    for start in 0..n {
        if state[start] != 0 {
            continue;
        }
        let mut path = Vec::new();
        let mut cur = start;
        let outcome = loop {
            match state[cur] {
                2 => break 2,
                3 | 1 => break 3,
                _ => {}
            }
            state[cur] = 1;
            path.push(cur);
            match &tweets[cur].reply_to {
                None => break 2,
                Some(parent) => match corpus.position(parent) {
                    Some(p) => cur = p,
                    None => break 3,
                },
            }
        };
        for i in path {
            state[i] = outcome;
        }
    }

    let mut children: HashMap<usize, Vec<usize>> = HashMap::new();
    for (i, t) in tweets.iter().enumerate() {
        if state[i] != 2 {
            continue;
        }
        if let Some(parent) = &t.reply_to {
            let p = corpus.position(parent).expect("rooted tweets resolve");
            children.entry(p).or_default().push(i);
        }
    }

    let key = |i: usize| -> Key { (tweets[i].timestamp, tweets[i].id.clone()) };

    let mut starters: Vec<usize> = (0..n)
        .filter(|&i| tweets[i].reply_to.is_none() && children.contains_key(&i))
        .collect();
    starters.sort_by_key(|&i| key(i));

    let conversations = starters
        .into_iter()
        .map(|root| {
            let mut order = Vec::new();
            let mut heap = BinaryHeap::new();
            heap.push(Reverse((key(root), root)));
            while let Some(Reverse((_, i))) = heap.pop() {
                order.push(tweets[i].id.clone());
                if let Some(kids) = children.get(&i) {
                    for &k in kids {
                        heap.push(Reverse((key(k), k)));
                    }
                }
            }
            Conversation {
                starter: tweets[root].id.clone(),
                tweets: order,
            }
        })
        .collect();

    let mut dangling: Vec<String> = (0..n)
        .filter(|&i| state[i] == 3)
        .map(|i| tweets[i].id.clone())
        .collect();
    dangling.sort();

    Threads {
        conversations,
        dangling,
    }
}
