package org.acme.inventory.io;

import java.io.IOException;
import java.io.Writer;
import java.util.List;

public final class CsvWriter {
    private final Writer out;

    public CsvWriter(Writer out) {
        this.out = out;
    }

    public void write(List<String[]> rows) throws IOException {
        for (String[] row : rows) {
            out.write(String.join(",", row));
            out.write('\n');
        }
        out.flush();
    }
}
