import java.io.File;
import java.io.IOException;
public boolean save(File target, String data) {
    try {
        writer.write(target, data);
    } catch (IOException error) {
        log(error);
        return false;
    }
    return true;
}
