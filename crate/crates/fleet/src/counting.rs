//! A channel wrapper that tallies received frames by type.

use std::collections::BTreeMap;

use privnav::net::{Channel, Frame, MsgType, NetError};

pub struct CountingChannel<C> {
    inner: C,
    received: BTreeMap<u8, u64>,
}

impl<C: Channel> CountingChannel<C> {
    pub fn new(inner: C) -> Self {
        Self { inner, received: BTreeMap::new() }
    }

    pub fn received(&self, kind: MsgType) -> u64 {
        self.received.get(&(kind as u8)).copied().unwrap_or(0)
    }

    pub fn tally(&self) -> BTreeMap<u8, u64> {
        self.received.clone()
    }

    pub fn inner(&self) -> &C {
        &self.inner
    }
}

impl<C: Channel> Channel for CountingChannel<C> {
    fn send(&mut self, frame: &Frame) -> Result<(), NetError> {
        self.inner.send(frame)
    }

    fn recv(&mut self) -> Result<Frame, NetError> {
        let f = self.inner.recv()?;
        *self.received.entry(f.kind as u8).or_default() += 1;
        Ok(f)
    }

    fn bytes_sent(&self) -> u64 {
        self.inner.bytes_sent()
    }

    fn bytes_received(&self) -> u64 {
        self.inner.bytes_received()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use privnav::net::mem_pair;

    #[test]
    fn counts_by_type() {
        let (mut a, b) = mem_pair();
        let mut b = CountingChannel::new(b);
        a.send_msg(MsgType::Alert, 1, vec![]).unwrap();
        a.send_msg(MsgType::Alert, 1, vec![1]).unwrap();
        a.send_msg(MsgType::Hello, 1, vec![]).unwrap();
        for _ in 0..3 {
            b.recv().unwrap();
        }
        assert_eq!((b.received(MsgType::Alert), b.received(MsgType::Hello), b.received(MsgType::OutputShare)), (2, 1, 0));
        assert_eq!(b.bytes_received(), a.bytes_sent());
    }
}
