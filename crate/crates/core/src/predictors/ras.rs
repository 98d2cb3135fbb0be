use std::collections::VecDeque;

/// Bounded return address stack. Pushing onto a full stack drops the oldest
/// address.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ras {
    stack: VecDeque<u64>,
    depth: usize,
}

impl Ras {
    pub fn new(depth: usize) -> Self {
        assert!(depth >= 1);
        Self {
            stack: VecDeque::with_capacity(depth),
            depth,
        }
    }

    pub fn push(&mut self, addr: u64) {
        if self.stack.len() == self.depth {
            self.stack.pop_front();
        }
        self.stack.push_back(addr);
    }

    pub fn pop(&mut self) -> Option<u64> {
        self.stack.pop_back()
    }

    pub fn peek(&self) -> Option<u64> {
        self.stack.back().copied()
    }

    pub fn len(&self) -> usize {
        self.stack.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stack.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lifo() {
        let mut ras = Ras::new(4);
        ras.push(1);
        ras.push(2);
        assert_eq!(ras.pop(), Some(2));
        assert_eq!(ras.pop(), Some(1));
        assert_eq!(ras.pop(), None);
    }

    #[test]
    fn overflow_drops_oldest() {
        let mut ras = Ras::new(2);
        for a in 1..=3 {
            ras.push(a);
        }
        assert_eq!(ras.len(), 2);
        assert_eq!(ras.pop(), Some(3));
        assert_eq!(ras.pop(), Some(2));
        assert_eq!(ras.pop(), None);
    }
}
