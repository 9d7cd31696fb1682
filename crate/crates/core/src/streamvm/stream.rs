/// A bounded byte stream with independent read and write cursors.
///
/// The write cursor is the end of the data; writes append.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Stream {
    data: Vec<u8>,
    read: usize,
    capacity: usize,
}

/// Saved cursor pair, restored by SEEK.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Mark {
    pub stream: u8,
    pub read: usize,
    pub write: usize,
}

impl Stream {
    pub fn new(capacity: usize) -> Self {
        Stream {
            data: Vec::new(),
            read: 0,
            capacity,
        }
    }

    /// A stream preloaded with `data` and no spare room.
    pub fn with_data(data: Vec<u8>) -> Self {
        let capacity = data.len();
        Stream {
            data,
            read: 0,
            capacity,
        }
    }

    pub fn unread(&self) -> &[u8] {
        &self.data[self.read..]
    }

    pub fn at_end(&self) -> bool {
        self.read >= self.data.len()
    }

    pub fn read_pos(&self) -> usize {
        self.read
    }

    pub fn write_pos(&self) -> usize {
        self.data.len()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn contents(&self) -> &[u8] {
        &self.data
    }

    pub fn into_contents(self) -> Vec<u8> {
        self.data
    }

    pub fn advance(&mut self, n: usize) {
        self.read = (self.read + n).min(self.data.len());
    }

    /// Appends bytes; false if the stream would exceed its capacity.
    pub fn write(&mut self, bytes: &[u8]) -> bool {
        if self.data.len() + bytes.len() > self.capacity {
            return false;
        }
        self.data.extend_from_slice(bytes);
        true
    }

    /// Replaces the whole content and rewinds the read cursor.
    pub fn replace(&mut self, bytes: &[u8]) -> bool {
        if bytes.len() > self.capacity {
            return false;
        }
        self.data.clear();
        self.data.extend_from_slice(bytes);
        self.read = 0;
        true
    }

    pub fn mark(&self, stream: u8) -> Mark {
        Mark {
            stream,
            read: self.read,
            write: self.data.len(),
        }
    }

    /// Restores a mark; false if the stream no longer holds the marked data.
    pub fn restore(&mut self, m: &Mark) -> bool {
        if m.write > self.data.len() || m.read > m.write {
            return false;
        }
        self.data.truncate(m.write);
        self.read = m.read;
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mark_and_restore() {
        let mut s = Stream::new(8);
        assert!(s.write(&[1, 2, 3]));
        s.advance(1);
        let m = s.mark(4);
        s.advance(2);
        assert!(s.write(&[4]));
        assert!(s.restore(&m));
        assert_eq!(s.unread(), &[2, 3]);
        assert!(!s.write(&[0; 6]));
        assert!(s.replace(&[9]));
        assert!(!s.restore(&m));
    }
}
